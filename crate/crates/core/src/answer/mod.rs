//! Text-side machinery for answering: masked templates, positive/negative
//! statement pairs, and answer vocabularies.

mod statements;
mod templates;
mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use statements::{attr_pair, relation_pair, StatementPair};
pub(crate) use statements::strip_copula;
pub use templates::{question_to_template, TemplateConverter, TemplateRule};
pub use vocab::{filter_vocab, normalize_answer_text, AnswerVocabulary};

pub const MASK: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("template must contain exactly one [MASK], found {found} in `{text}`")]
    MaskCount { text: String, found: usize },
    #[error("answer vocabulary is empty")]
    EmptyVocabulary,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("bad template rule on line {line}: {message}")]
    BadRule { line: usize, message: String },
}

/// Text with exactly one `[MASK]` slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskedTemplate(String);

impl MaskedTemplate {
    pub fn new(text: impl Into<String>) -> Result<MaskedTemplate, TextError> {
        let text = text.into();
        let found = text.matches(MASK).count();
        if found != 1 {
            return Err(TextError::MaskCount { text, found });
        }
        Ok(MaskedTemplate(text))
    }

    /// The bare `[MASK]` template.
    pub fn bare() -> MaskedTemplate {
        MaskedTemplate(MASK.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Substitutes a candidate answer into the slot.
    pub fn fill(&self, answer: &str) -> String {
        self.0.replacen(MASK, answer, 1)
    }
}

impl TryFrom<String> for MaskedTemplate {
    type Error = TextError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        MaskedTemplate::new(value)
    }
}

impl From<MaskedTemplate> for String {
    fn from(t: MaskedTemplate) -> Self {
        t.0
    }
}

impl fmt::Display for MaskedTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Collapses runs of whitespace to single spaces and trims.
pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
