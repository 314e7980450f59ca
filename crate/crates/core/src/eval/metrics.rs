use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{EvalError, Prediction, QuestionRecord};
use crate::answer::collapse_ws;

pub const ANNOTATORS: usize = 10;

/// Lowercase, trimmed, no terminal punctuation, single spaces, no leading
/// article. Applied to predictions and gold answers alike.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let trimmed = lower
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    let mut words: Vec<&str> = trimmed.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    collapse_ws(&words.join(" "))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub count: usize,
    /// Sum of per-question scores.
    pub score: f64,
    pub accuracy: f64,
}

impl TypeStats {
    fn add(&mut self, score: f64) {
        self.count += 1;
        self.score += score;
    }

    fn finish(&mut self) {
        self.accuracy = if self.count == 0 {
            0.0
        } else {
            self.score / self.count as f64
        };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: f64,
    pub total: usize,
    pub failures: usize,
    /// Gold questions without a prediction; they score 0.
    pub missing: Vec<String>,
    pub per_type: BTreeMap<String, TypeStats>,
    /// Questions whose gold answer is yes or no.
    pub yes_no: TypeStats,
    pub other: TypeStats,
}

fn report_with(
    predictions: &[Prediction],
    gold: &[QuestionRecord],
    mut score: impl FnMut(&Prediction, &QuestionRecord) -> Result<f64, EvalError>,
) -> Result<MetricsReport, EvalError> {
    let by_id: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.question_id.as_str(), p))
        .collect();
    let mut report = MetricsReport::default();
    let mut all = TypeStats::default();
    for g in gold {
        let s = match by_id.get(g.question_id.as_str()) {
            Some(p) => {
                if p.is_failed() {
                    report.failures += 1;
                }
                score(p, g)?
            }
            None => {
                report.missing.push(g.question_id.clone());
                0.0
            }
        };
        all.add(s);
        report
            .per_type
            .entry(g.qtype.as_str().to_string())
            .or_default()
            .add(s);
        let gold_norm = normalize_answer(&g.answer);
        if gold_norm == "yes" || gold_norm == "no" {
            report.yes_no.add(s);
        } else {
            report.other.add(s);
        }
    }
    all.finish();
    report.yes_no.finish();
    report.other.finish();
    for t in report.per_type.values_mut() {
        t.finish();
    }
    report.total = all.count;
    report.overall = all.accuracy;
    Ok(report)
}

/// Exact match after normalization.
pub fn evaluate_standard(predictions: &[Prediction], gold: &[QuestionRecord]) -> MetricsReport {
    report_with(predictions, gold, |p, g| {
        Ok(if !p.is_failed() && normalize_answer(&p.answer) == normalize_answer(&g.answer) {
            1.0
        } else {
            0.0
        })
    })
    .expect("standard scoring cannot fail")
}

/// `min(matching annotators / 3, 1)` over exactly ten annotator answers.
pub fn evaluate_soft(prediction: &str, annotator_answers: &[String]) -> Result<f64, EvalError> {
    if annotator_answers.len() != ANNOTATORS {
        return Err(EvalError::WrongAnnotatorCount(annotator_answers.len()));
    }
    let p = normalize_answer(prediction);
    let matches = annotator_answers
        .iter()
        .filter(|a| normalize_answer(a) == p)
        .count();
    Ok((matches as f64 / 3.0).min(1.0))
}

/// Soft accuracy over a dataset; every gold record needs annotator answers.
pub fn evaluate_soft_report(
    predictions: &[Prediction],
    gold: &[QuestionRecord],
) -> Result<MetricsReport, EvalError> {
    report_with(predictions, gold, |p, g| {
        let answers = g
            .answers
            .as_ref()
            .ok_or_else(|| EvalError::MissingAnnotatorAnswers(g.question_id.clone()))?;
        if p.is_failed() {
            if answers.len() != ANNOTATORS {
                return Err(EvalError::WrongAnnotatorCount(answers.len()));
            }
            return Ok(0.0);
        }
        evaluate_soft(&p.answer, answers)
    })
}
