//! Datasets, metrics, out-of-distribution splits and the batch pipeline.

mod dataset;
mod metrics;
mod ood;
mod pipeline;

use std::path::PathBuf;

pub use dataset::{
    read_jsonl, read_predictions, read_questions, write_jsonl, Failure, Prediction,
    QuestionRecord, QuestionType,
};
pub use metrics::{
    evaluate_soft, evaluate_soft_report, evaluate_standard, normalize_answer, MetricsReport,
    TypeStats, ANNOTATORS,
};
pub use ood::{listed_fraction, ood_filter, ObjectList, OodSplit, DEFAULT_TEST_PORTION};
pub use pipeline::{
    answer_question, run_pipeline, traces_to_jsonl, vocabulary_from_gold, PipelineOptions,
    PipelineOutput,
};

use crate::layout::LayoutError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("question {question_id}: {source}")]
    Layout {
        question_id: String,
        source: LayoutError,
    },
    #[error("question {question_id}: type {found} does not fit a {expected} layout")]
    TypeMismatch {
        question_id: String,
        expected: QuestionType,
        found: QuestionType,
    },
    #[error("duplicate question id {0}")]
    DuplicateQuestion(String),
    #[error("no scene graph for image {0}")]
    MissingSceneGraph(String),
    #[error("soft accuracy needs exactly {ANNOTATORS} annotator answers, got {0}")]
    WrongAnnotatorCount(usize),
    #[error("question {0} has no annotator answers")]
    MissingAnnotatorAnswers(String),
    #[error("test portion {0} outside (0, 1]")]
    InvalidPortion(f64),
}
