use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::exec::{FailureKind, QAResult, Status};
use crate::layout::{parse_layout, Layout, ModuleName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Verify,
    Logical,
    Choose,
    Compare,
    Query,
    Count,
}

impl QuestionType {
    pub const ALL: [QuestionType; 6] = [
        QuestionType::Verify,
        QuestionType::Logical,
        QuestionType::Choose,
        QuestionType::Compare,
        QuestionType::Query,
        QuestionType::Count,
    ];

    pub fn for_root(module: ModuleName) -> Option<QuestionType> {
        Some(match module {
            ModuleName::Exist => QuestionType::Verify,
            ModuleName::And | ModuleName::Or => QuestionType::Logical,
            ModuleName::Choose => QuestionType::Choose,
            ModuleName::Compare => QuestionType::Compare,
            ModuleName::Query => QuestionType::Query,
            ModuleName::Count => QuestionType::Count,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Verify => "verify",
            QuestionType::Logical => "logical",
            QuestionType::Choose => "choose",
            QuestionType::Compare => "compare",
            QuestionType::Query => "query",
            QuestionType::Count => "count",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    pub image_id: String,
    pub question: String,
    pub layout: String,
    pub answer: String,
    /// Annotator answers for soft scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<Vec<String>>,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
}

impl QuestionRecord {
    /// Parses the layout and checks that the type fits its root.
    pub fn parsed_layout(&self) -> Result<Layout, EvalError> {
        let layout = parse_layout(&self.layout).map_err(|source| EvalError::Layout {
            question_id: self.question_id.clone(),
            source,
        })?;
        let expected = QuestionType::for_root(layout.root.module)
            .expect("parsed layouts always have an answer root");
        if expected != self.qtype {
            return Err(EvalError::TypeMismatch {
                question_id: self.question_id.clone(),
                expected,
                found: self.qtype,
            });
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl Prediction {
    pub fn from_result(question_id: &str, result: &QAResult) -> Prediction {
        let failure = match &result.status {
            Status::Ok => None,
            Status::Failed { kind, message } => Some(Failure {
                kind: *kind,
                message: message.clone(),
            }),
        };
        Prediction {
            question_id: question_id.to_string(),
            answer: result.answer.clone(),
            failure,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Reads one JSON document per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| EvalError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for item in items {
        let line = serde_json::to_string(item).expect("records always serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads question records, rejecting duplicate ids and layouts that do not
/// parse or do not fit their type.
pub fn read_questions(path: &Path) -> Result<Vec<QuestionRecord>, EvalError> {
    let records: Vec<QuestionRecord> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.question_id.as_str()) {
            return Err(EvalError::DuplicateQuestion(r.question_id.clone()));
        }
        r.parsed_layout()?;
    }
    Ok(records)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    read_jsonl(path)
}
