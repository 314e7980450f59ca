use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate_standard, MetricsReport, Prediction, QuestionRecord};
use crate::answer::AnswerVocabulary;
use crate::backend::Backend;
use crate::exec::{execute, ExecInput, ExecutionConfig, FailureKind, QAResult, TraceEvent};
use crate::plan::compile;

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub config: ExecutionConfig,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub vocabulary: Option<AnswerVocabulary>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            config: ExecutionConfig::default(),
            workers: 0,
            vocabulary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Sorted by question id.
    pub predictions: Vec<Prediction>,
    /// Parallel to `predictions`.
    pub traces: Vec<(String, Vec<TraceEvent>)>,
    pub report: MetricsReport,
}

impl PipelineOutput {
    pub fn failures_of(&self, kind: FailureKind) -> usize {
        self.predictions
            .iter()
            .filter(|p| p.failure.as_ref().is_some_and(|f| f.kind == kind))
            .count()
    }
}

/// Compiles and runs one question. Layout problems become a failed result.
pub fn answer_question(
    record: &QuestionRecord,
    backend: &dyn Backend,
    config: &ExecutionConfig,
    vocabulary: Option<&AnswerVocabulary>,
) -> QAResult {
    let layout = match record.parsed_layout() {
        Ok(l) => l,
        Err(e) => return QAResult::failed(FailureKind::Compile, e.to_string()),
    };
    let plan = match compile(&layout) {
        Ok(p) => p,
        Err(e) => return QAResult::failed(FailureKind::Compile, e.to_string()),
    };
    let mut input = ExecInput::new(&record.image_id).with_question(&record.question);
    if let Some(v) = vocabulary {
        input = input.with_vocabulary(v);
    }
    execute(&plan, input, backend, config)
}

/// Answer vocabulary made of the gold answers, in first-seen order.
pub fn vocabulary_from_gold(records: &[QuestionRecord]) -> Option<AnswerVocabulary> {
    AnswerVocabulary::new(records.iter().map(|r| r.answer.as_str())).ok()
}

/// Answers every question on a bounded pool and scores the result.
pub fn run_pipeline(
    records: &[QuestionRecord],
    backend: &dyn Backend,
    options: &PipelineOptions,
) -> PipelineOutput {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .expect("thread pool");
    let vocab = options.vocabulary.as_ref();
    let mut results: Vec<(String, QAResult)> = pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                let result = answer_question(r, backend, &options.config, vocab);
                (r.question_id.clone(), result)
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let predictions: Vec<Prediction> = results
        .iter()
        .map(|(id, r)| Prediction::from_result(id, r))
        .collect();
    let report = evaluate_standard(&predictions, records);
    let traces = results.into_iter().map(|(id, r)| (id, r.trace)).collect();
    PipelineOutput {
        predictions,
        traces,
        report,
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    question_id: &'a str,
    #[serde(flatten)]
    event: &'a TraceEvent,
}

/// One event per line, tagged with its question id.
pub fn traces_to_jsonl(traces: &[(String, Vec<TraceEvent>)]) -> String {
    let mut out = String::new();
    for (id, events) in traces {
        for event in events {
            out.push_str(
                &serde_json::to_string(&TraceLine {
                    question_id: id,
                    event,
                })
                .expect("trace events always serialize"),
            );
            out.push('\n');
        }
    }
    out
}
