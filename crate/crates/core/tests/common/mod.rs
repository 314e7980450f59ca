#![allow(dead_code)]

use std::path::PathBuf;

use modvqa_core::answer::AnswerVocabulary;
use modvqa_core::backend::OracleBackend;
use modvqa_core::eval::{read_questions, QuestionRecord};

pub mod backends;
pub mod brute;
pub mod criteria;
pub mod gen;

pub fn mini_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/mini")
}

pub fn mini_oracle() -> OracleBackend {
    OracleBackend::from_dir(&mini_dir().join("scenes")).expect("mini scenes")
}

pub fn mini_questions() -> Vec<QuestionRecord> {
    read_questions(&mini_dir().join("questions.jsonl")).expect("mini questions")
}

pub fn mini_vocab() -> AnswerVocabulary {
    let text = std::fs::read_to_string(mini_dir().join("vocab.txt")).expect("vocab");
    AnswerVocabulary::from_lines(&text).expect("vocab parses")
}
