use serde::{Deserialize, Serialize};

use super::{collapse_ws, MaskedTemplate, TextError};
use crate::backend::{Backend, BackendError, BackendExt};

/// Ordered candidate answers: lowercase, trimmed, no trailing punctuation,
/// no duplicates, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AnswerVocabulary {
    candidates: Vec<String>,
}

/// Lowercases, trims, collapses whitespace and strips trailing punctuation.
pub fn normalize_answer_text(s: &str) -> String {
    let s = collapse_ws(&s.to_lowercase());
    s.trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

impl AnswerVocabulary {
    pub fn new<I, S>(items: I) -> Result<AnswerVocabulary, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut candidates: Vec<String> = Vec::new();
        for item in items {
            let norm = normalize_answer_text(item.as_ref());
            if !norm.is_empty() && !candidates.contains(&norm) {
                candidates.push(norm);
            }
        }
        if candidates.is_empty() {
            return Err(TextError::EmptyVocabulary);
        }
        Ok(AnswerVocabulary { candidates })
    }

    /// One candidate per non-blank line; `#` starts a comment line.
    pub fn from_lines(text: &str) -> Result<AnswerVocabulary, TextError> {
        AnswerVocabulary::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, answer: &str) -> bool {
        self.candidates.iter().any(|c| c == answer)
    }
}

impl TryFrom<Vec<String>> for AnswerVocabulary {
    type Error = TextError;

    fn try_from(value: Vec<String>) -> Result<Self, Self::Error> {
        AnswerVocabulary::new(value)
    }
}

impl From<AnswerVocabulary> for Vec<String> {
    fn from(v: AnswerVocabulary) -> Self {
        v.candidates
    }
}

/// Narrows the vocabulary to at most `k` answers ranked by the backend's
/// language model. The backend must return a subset of the input.
pub fn filter_vocab(
    template: &MaskedTemplate,
    vocab: &AnswerVocabulary,
    backend: &dyn Backend,
    k: usize,
) -> Result<AnswerVocabulary, BackendError> {
    if k == 0 {
        return Err(BackendError::InvalidRequest(TextError::ZeroK.to_string()));
    }
    let ranked = backend.filter_answers(template.as_str(), vocab.candidates(), k)?;
    if ranked.len() > k {
        return Err(BackendError::InvalidResponse(format!(
            "filter_answers returned {} candidates for k={k}",
            ranked.len()
        )));
    }
    let mut kept: Vec<String> = Vec::with_capacity(ranked.len());
    for c in ranked {
        if !vocab.contains(&c) {
            return Err(BackendError::InvalidResponse(format!(
                "filter_answers returned `{c}`, which is not a candidate"
            )));
        }
        if !kept.contains(&c) {
            kept.push(c);
        }
    }
    AnswerVocabulary::new(kept).map_err(|e| BackendError::InvalidResponse(e.to_string()))
}
