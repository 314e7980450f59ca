//! Plan interpretation against a backend.
//!
//! Steps are evaluated on demand from the plan root, so a step whose
//! result is never needed (for example the box lookups of an existence
//! check whose objects are missing) is never run and never traced.

mod trace;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::answer::{attr_pair, filter_vocab, question_to_template, AnswerVocabulary, MaskedTemplate};
use crate::backend::{Backend, BackendError, BackendExt, MatchIntent};
use crate::geometry::{
    filter_and_select, make_region, spc, spd, Axis, BoundingBox, Detection, GeometryError,
    RegionSpec, Selection, SpatialPair,
};
use crate::plan::{Candidates, LogicOp, PlanStep, Source, StepId, ZeroShotPlan};

pub use trace::{trace_from_jsonl, trace_to_jsonl, without_wall_times, TraceEvent};

pub const YES: &str = "yes";
pub const NO: &str = "no";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    pub detector_threshold: f64,
    pub grounder_threshold: f64,
    /// How many vocabulary answers survive the language-model filter.
    pub answer_top_k: usize,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            detector_threshold: 0.2,
            grounder_threshold: 0.7,
            answer_top_k: 100,
        }
    }
}

impl ExecutionConfig {
    pub fn threshold(&self, source: Source) -> f64 {
        match source {
            Source::Detector => self.detector_threshold,
            Source::Grounder => self.grounder_threshold,
        }
    }

    pub fn check(&self) -> Result<(), ExecError> {
        for (name, t) in [
            ("detector_threshold", self.detector_threshold),
            ("grounder_threshold", self.grounder_threshold),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(ExecError::InvalidConfig(format!("{name} {t} outside [0, 1]")));
            }
        }
        if self.answer_top_k == 0 {
            return Err(ExecError::InvalidConfig("answer_top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    EmptyDetection,
    BackendUnavailable,
    Backend,
    MissingVocabulary,
    InvalidConfig,
    InvalidPlan,
    Compile,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("no box survived the threshold for {0}")]
    EmptyDetection(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("the plan matches against the answer vocabulary, but none was given")]
    MissingVocabulary,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("{scores} scores for {candidates} candidates")]
    LengthMismatch { scores: usize, candidates: usize },
}

impl ExecError {
    pub fn kind(&self) -> FailureKind {
        match self {
            ExecError::EmptyDetection(_) => FailureKind::EmptyDetection,
            ExecError::Backend(BackendError::Unavailable(_)) => FailureKind::BackendUnavailable,
            ExecError::Backend(_) => FailureKind::Backend,
            ExecError::MissingVocabulary => FailureKind::MissingVocabulary,
            ExecError::InvalidConfig(_) => FailureKind::InvalidConfig,
            ExecError::InvalidPlan(_) | ExecError::LengthMismatch { .. } => {
                FailureKind::InvalidPlan
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed { kind: FailureKind, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAResult {
    /// Empty when the execution failed.
    pub answer: String,
    pub trace: Vec<TraceEvent>,
    pub status: Status,
}

impl QAResult {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn failed(kind: FailureKind, message: impl Into<String>) -> QAResult {
        QAResult {
            answer: String::new(),
            trace: Vec::new(),
            status: Status::Failed {
                kind,
                message: message.into(),
            },
        }
    }
}

/// What a plan runs on.
#[derive(Debug, Clone, Copy)]
pub struct ExecInput<'a> {
    pub image: &'a str,
    pub vocabulary: Option<&'a AnswerVocabulary>,
    /// Used to build the template for vocabulary filtering.
    pub question: Option<&'a str>,
}

impl<'a> ExecInput<'a> {
    pub fn new(image: &'a str) -> ExecInput<'a> {
        ExecInput {
            image,
            vocabulary: None,
            question: None,
        }
    }

    pub fn with_vocabulary(mut self, vocabulary: &'a AnswerVocabulary) -> Self {
        self.vocabulary = Some(vocabulary);
        self
    }

    pub fn with_question(mut self, question: &'a str) -> Self {
        self.question = Some(question);
        self
    }
}

/// Index of the highest score; ties go to the earliest candidate.
pub fn select_answer<'c>(scores: &[f64], candidates: &'c [String]) -> Result<&'c str, ExecError> {
    if scores.len() != candidates.len() || candidates.is_empty() {
        return Err(ExecError::LengthMismatch {
            scores: scores.len(),
            candidates: candidates.len(),
        });
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(&candidates[best])
}

pub fn run_logic(op: LogicOp, left: bool, right: bool) -> bool {
    match op {
        LogicOp::And => left && right,
        LogicOp::Or => left || right,
    }
}

pub fn yes_no(b: bool) -> &'static str {
    if b {
        YES
    } else {
        NO
    }
}

/// Spatial heuristic input: the top box of each selection.
#[derive(Debug, Clone, Copy)]
pub enum SpatialStep<'a> {
    SpD(Axis),
    SpC(&'a SpatialPair),
}

pub fn run_spatial(step: SpatialStep<'_>, boxes: &[Option<BoundingBox>]) -> Result<String, ExecError> {
    let need = |i: usize| {
        boxes
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| ExecError::EmptyDetection(format!("spatial input {}", i + 1)))
    };
    Ok(match step {
        SpatialStep::SpD(axis) => spd(&need(0)?, axis).as_str().to_string(),
        SpatialStep::SpC(pair) => spc(&need(0)?, &need(1)?, pair).to_string(),
    })
}

enum Val {
    Detection(Detection),
    Selection(Selection),
    Region(RegionSpec),
    Answer(String),
}

struct Run<'a> {
    plan: &'a ZeroShotPlan,
    input: ExecInput<'a>,
    backend: &'a dyn Backend,
    config: &'a ExecutionConfig,
    trace: Vec<TraceEvent>,
}

fn geometry(e: GeometryError) -> ExecError {
    ExecError::Backend(BackendError::InvalidResponse(e.to_string()))
}

fn boxes_json(det: &Detection) -> Value {
    json!({"boxes": det.boxes, "scores": det.scores})
}

impl Run<'_> {
    fn record(&mut self, id: StepId, inputs: Value, outputs: Value, started: Instant) {
        self.trace.push(TraceEvent {
            seq: self.trace.len(),
            step_id: id,
            kind: self.plan.steps[id].kind().to_string(),
            inputs,
            outputs,
            wall_time_us: started.elapsed().as_micros() as u64,
        });
    }

    fn step(&self, id: StepId) -> Result<&PlanStep, ExecError> {
        self.plan
            .steps
            .get(id)
            .ok_or_else(|| ExecError::InvalidPlan(format!("step #{id} does not exist")))
    }

    fn selection(&mut self, id: StepId) -> Result<Selection, ExecError> {
        match self.eval(id)? {
            Val::Selection(s) => Ok(s),
            _ => Err(ExecError::InvalidPlan(format!("step #{id} is not a selection"))),
        }
    }

    fn answer(&mut self, id: StepId) -> Result<String, ExecError> {
        match self.eval(id)? {
            Val::Answer(a) => Ok(a),
            _ => Err(ExecError::InvalidPlan(format!("step #{id} does not answer"))),
        }
    }

    fn sanitize(det: Detection) -> Result<(Detection, usize), ExecError> {
        let (det, clamped) = det.sanitized().map_err(geometry)?;
        if clamped > 0 {
            log::warn!("clamped {clamped} box(es) that overshot the image");
        }
        Ok((det, clamped))
    }

    /// Evaluates a step, recording a trace event whether or not it succeeds.
    fn eval(&mut self, id: StepId) -> Result<Val, ExecError> {
        let step = self.step(id)?.clone();
        let started = Instant::now();
        let mut inputs = Value::Null;
        let result = self.eval_inner(&step, &mut inputs);
        match &result {
            Ok((_, outputs)) => self.record(id, inputs, outputs.clone(), started),
            Err(e) => self.record(id, inputs, json!({"error": e.to_string()}), started),
        }
        result.map(|(v, _)| v)
    }

    fn eval_inner(&mut self, step: &PlanStep, inputs: &mut Value) -> Result<(Val, Value), ExecError> {
        let image = self.input.image;
        match step {
            PlanStep::Detect { object } => {
                *inputs = json!({"object": object});
                let (det, clamped) = Self::sanitize(self.backend.detect(image, object)?)?;
                let mut out = boxes_json(&det);
                out["clamped"] = json!(clamped);
                Ok((Val::Detection(det), out))
            }
            PlanStep::Ground { query } => {
                *inputs = json!({"sentence": query.sentence});
                let (det, clamped) = Self::sanitize(self.backend.ground(image, query)?)?;
                let mut out = boxes_json(&det);
                out["clamped"] = json!(clamped);
                Ok((Val::Detection(det), out))
            }
            PlanStep::ThresholdSelect { source, input } => {
                let det = match self.eval(*input)? {
                    Val::Detection(d) => d,
                    _ => return Err(ExecError::InvalidPlan(format!("step #{input} is not a detection"))),
                };
                let threshold = self.config.threshold(*source);
                *inputs = json!({"source": source, "threshold": threshold, "boxes": det.len()});
                let sel = filter_and_select(&det, threshold);
                let out = json!({"kept": sel.filtered.len(), "top1": sel.top1});
                Ok((Val::Selection(sel), out))
            }
            PlanStep::Region { inputs: ids, .. } => {
                let mut boxes = Vec::with_capacity(ids.len());
                for &i in ids {
                    let sel = self.selection(i)?;
                    let top = sel
                        .top1
                        .ok_or_else(|| ExecError::EmptyDetection(format!("region input #{i}")))?;
                    boxes.push(top.bbox);
                }
                *inputs = json!({"boxes": boxes});
                let region = make_region(&boxes).map_err(|e| ExecError::InvalidPlan(e.to_string()))?;
                Ok((Val::Region(region), json!({"region": region})))
            }
            PlanStep::MatchTexts {
                template,
                candidates,
                intent,
                region,
            } => {
                let region = match self.eval(*region)? {
                    Val::Region(r) => r,
                    _ => return Err(ExecError::InvalidPlan(format!("step #{region} is not a region"))),
                };
                let candidates = match candidates {
                    Candidates::Fixed(c) => c.clone(),
                    Candidates::Vocabulary => {
                        let vocab = self.input.vocabulary.ok_or(ExecError::MissingVocabulary)?;
                        let filter_template = match self.input.question {
                            Some(q) => question_to_template(q).unwrap_or_else(|_| MaskedTemplate::bare()),
                            None => template.clone(),
                        };
                        let kept = filter_vocab(&filter_template, vocab, self.backend, self.config.answer_top_k)?;
                        *inputs = json!({"filter_template": filter_template, "vocabulary": vocab.len()});
                        kept.candidates().to_vec()
                    }
                };
                let texts: Vec<String> = candidates.iter().map(|c| template.fill(c)).collect();
                let intents: Vec<MatchIntent> = candidates
                    .iter()
                    .enumerate()
                    .map(|(i, c)| intent.intent_for(c, i))
                    .collect();
                let scores = self.backend.match_texts(image, &region, &texts, Some(&intents))?;
                let answer = select_answer(&scores, &candidates)?.to_string();
                let out = json!({"texts": texts, "scores": scores, "answer": answer});
                Ok((Val::Answer(answer), out))
            }
            PlanStep::SpD { axis, input } => {
                let sel = self.selection(*input)?;
                let top = sel.top1.map(|t| t.bbox);
                *inputs = json!({"axis": axis, "box": top});
                let label = run_spatial(SpatialStep::SpD(*axis), &[top])?;
                let out = json!({"answer": label});
                Ok((Val::Answer(label), out))
            }
            PlanStep::SpC {
                pair,
                subject,
                object,
            } => {
                let a = self.selection(*subject)?.top1.map(|t| t.bbox);
                let b = self.selection(*object)?.top1.map(|t| t.bbox);
                *inputs = json!({"pair": pair, "boxes": [a, b]});
                let label = run_spatial(SpatialStep::SpC(pair), &[a, b])?;
                let out = json!({"answer": label});
                Ok((Val::Answer(label), out))
            }
            PlanStep::Count { input } => {
                let sel = self.selection(*input)?;
                let n = sel.filtered.len().to_string();
                *inputs = json!({"boxes": sel.filtered.len()});
                let out = json!({"answer": n});
                Ok((Val::Answer(n), out))
            }
            PlanStep::ExistObject { object } => {
                *inputs = json!({"object": object});
                let (found, out) = self.object_present(object)?;
                let answer = yes_no(found).to_string();
                Ok((Val::Answer(answer.clone()), json!({"detection": out, "answer": answer})))
            }
            PlanStep::ExistAttr {
                nouns,
                attributes,
                target,
            } => {
                *inputs = json!({"nouns": nouns, "attributes": attributes});
                let (present, checks) = self.verify_nouns(nouns)?;
                if !present {
                    let out = json!({"nouns": checks, "answer": NO});
                    return Ok((Val::Answer(NO.into()), out));
                }
                let sel = self.selection(*target)?;
                let Some(top) = sel.top1 else {
                    let out = json!({"nouns": checks, "target": Value::Null, "answer": NO});
                    return Ok((Val::Answer(NO.into()), out));
                };
                let region = RegionSpec::Crop(top.bbox);
                let mut results = Vec::new();
                let mut all = true;
                for a in attributes {
                    let pair = attr_pair(a).map_err(|e| ExecError::InvalidPlan(e.to_string()))?;
                    let texts = [pair.positive, pair.negative];
                    let intents = [
                        MatchIntent::Attribute {
                            attribute: a.clone(),
                            negated: false,
                        },
                        MatchIntent::Attribute {
                            attribute: a.clone(),
                            negated: true,
                        },
                    ];
                    let scores = self.backend.match_texts(image, &region, &texts, Some(&intents))?;
                    let holds = scores[0] > scores[1];
                    results.push(json!({"texts": texts, "scores": scores, "holds": holds}));
                    if !holds {
                        all = false;
                        break;
                    }
                }
                let answer = yes_no(all).to_string();
                let out = json!({"nouns": checks, "region": region, "checks": results, "answer": answer});
                Ok((Val::Answer(answer), out))
            }
            PlanStep::ExistRela {
                nouns,
                relation,
                statements,
                subject,
                object,
            } => {
                *inputs = json!({"nouns": nouns, "relation": relation});
                let (present, checks) = self.verify_nouns(nouns)?;
                if !present {
                    let out = json!({"nouns": checks, "answer": NO});
                    return Ok((Val::Answer(NO.into()), out));
                }
                let a = self.selection(*subject)?.top1;
                let b = self.selection(*object)?.top1;
                let (Some(a), Some(b)) = (a, b) else {
                    let out = json!({"nouns": checks, "boxes": [a, b], "answer": NO});
                    return Ok((Val::Answer(NO.into()), out));
                };
                let region = RegionSpec::MaskKeep(a.bbox, b.bbox);
                let texts = [statements.positive.clone(), statements.negative.clone()];
                let intents = [
                    MatchIntent::Relation {
                        relation: relation.clone(),
                        negated: false,
                    },
                    MatchIntent::Relation {
                        relation: relation.clone(),
                        negated: true,
                    },
                ];
                let scores = self.backend.match_texts(image, &region, &texts, Some(&intents))?;
                let answer = yes_no(scores[0] > scores[1]).to_string();
                let out = json!({"nouns": checks, "region": region, "texts": texts, "scores": scores, "answer": answer});
                Ok((Val::Answer(answer), out))
            }
            PlanStep::Logic { op, left, right } => {
                let l = self.answer(*left)? == YES;
                let r = self.answer(*right)? == YES;
                *inputs = json!({"op": op, "left": yes_no(l), "right": yes_no(r)});
                let answer = yes_no(run_logic(*op, l, r)).to_string();
                let out = json!({"answer": answer});
                Ok((Val::Answer(answer), out))
            }
        }
    }

    /// Detector check for one object name.
    fn object_present(&mut self, object: &str) -> Result<(bool, Value), ExecError> {
        let (det, _) = Self::sanitize(self.backend.detect(self.input.image, object)?)?;
        let sel = filter_and_select(&det, self.config.detector_threshold);
        let out = json!({
            "object": object,
            "threshold": self.config.detector_threshold,
            "boxes": det.len(),
            "kept": sel.filtered.len(),
        });
        Ok((sel.top1.is_some(), out))
    }

    /// Stops at the first missing object.
    fn verify_nouns(&mut self, nouns: &[String]) -> Result<(bool, Value), ExecError> {
        let mut checks = Vec::new();
        for n in nouns {
            let (found, out) = self.object_present(n)?;
            checks.push(out);
            if !found {
                return Ok((false, Value::Array(checks)));
            }
        }
        Ok((true, Value::Array(checks)))
    }
}

/// Runs a compiled plan. Failures are reported in the result's status,
/// along with the trace up to the failing step.
pub fn execute(
    plan: &ZeroShotPlan,
    input: ExecInput<'_>,
    backend: &dyn Backend,
    config: &ExecutionConfig,
) -> QAResult {
    if let Err(e) = config.check() {
        return QAResult::failed(e.kind(), e.to_string());
    }
    let mut run = Run {
        plan,
        input,
        backend,
        config,
        trace: Vec::new(),
    };
    let outcome = run.answer(plan.root);
    let trace = run.trace;
    match outcome {
        Ok(answer) if !answer.is_empty() => QAResult {
            answer,
            trace,
            status: Status::Ok,
        },
        Ok(_) => QAResult {
            answer: String::new(),
            trace,
            status: Status::Failed {
                kind: FailureKind::InvalidPlan,
                message: "execution produced an empty answer".into(),
            },
        },
        Err(e) => QAResult {
            answer: String::new(),
            trace,
            status: Status::Failed {
                kind: e.kind(),
                message: e.to_string(),
            },
        },
    }
}

/// Existence answer for a single existence step, run on its own.
pub fn run_exist(
    plan: &ZeroShotPlan,
    step: StepId,
    image: &str,
    backend: &dyn Backend,
    config: &ExecutionConfig,
) -> Result<bool, ExecError> {
    match plan.steps.get(step) {
        Some(PlanStep::ExistObject { .. } | PlanStep::ExistAttr { .. } | PlanStep::ExistRela { .. }) => {}
        _ => return Err(ExecError::InvalidPlan(format!("step #{step} is not an existence check"))),
    }
    let mut run = Run {
        plan,
        input: ExecInput::new(image),
        backend,
        config,
        trace: Vec::new(),
    };
    Ok(run.answer(step)? == YES)
}
