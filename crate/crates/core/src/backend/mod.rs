//! Model capabilities the executor relies on, and the backends that
//! provide them.
//!
//! Every backend answers four kinds of request: open-vocabulary detection,
//! phrase grounding, image/text matching and masked-answer filtering. The
//! scene-graph oracle answers them from annotations; the remote client
//! forwards them over HTTP to a model service speaking the same protocol.

pub mod conformance;
mod oracle;
mod remote;
mod replay;
mod scene;
mod server;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::geometry::{Detection, RegionSpec};
use crate::plan::{GroundingQuery, StructuredQuery};

pub use oracle::OracleBackend;
pub use remote::{RemoteBackend, DEFAULT_TIMEOUT};
pub use replay::{calls_to_jsonl, RecordedCall, RecordingBackend, ReplayBackend};
pub use scene::{
    load_aliases, load_scene_dir, normalize_name, normalize_relation, SceneError, SceneGraph,
    SceneObject, SceneRelation,
};
pub use server::{handle_http, serve, ServerHandle};

/// Machine-readable meaning of one text sent to the matcher. Model services
/// ignore it; the oracle evaluates it against the scene graph restricted to
/// the region's boxes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum MatchIntent {
    /// An object in the region has this name.
    Name { name: String },
    /// The object in the (first) region box has the attribute.
    Attribute {
        attribute: String,
        #[serde(default)]
        negated: bool,
    },
    /// The object in the first box stands in `relation` to the one in the second.
    Relation {
        relation: String,
        #[serde(default)]
        negated: bool,
    },
    /// The object in box `subject` is `<comparative> than` the other one.
    Comparative { comparative: String, subject: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub image: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundRequest {
    pub image: String,
    pub sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<StructuredQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRequest {
    pub image: String,
    pub region: RegionSpec,
    pub texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intents: Option<Vec<MatchIntent>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterAnswersRequest {
    pub template: String,
    pub candidates: Vec<String>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BackendRequest {
    Detect(DetectRequest),
    Ground(GroundRequest),
    Match(MatchRequest),
    FilterAnswers(FilterAnswersRequest),
}

impl BackendRequest {
    pub fn op(&self) -> Op {
        match self {
            BackendRequest::Detect(_) => Op::Detect,
            BackendRequest::Ground(_) => Op::Ground,
            BackendRequest::Match(_) => Op::Match,
            BackendRequest::FilterAnswers(_) => Op::FilterAnswers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Detect,
    Ground,
    Match,
    FilterAnswers,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Detect => "detect",
            Op::Ground => "ground",
            Op::Match => "match",
            Op::FilterAnswers => "filter_answers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendResponse {
    Detection(Detection),
    Scores { scores: Vec<f64> },
    Candidates { candidates: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum BackendError {
    #[error("unknown image `{0}`")]
    UnknownImage(String),
    #[error("the oracle needs a structured {0}")]
    OracleNeedsStructured(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
}

/// A provider of the four model capabilities. Implementations must be safe
/// to call from many threads at once.
pub trait Backend: Send + Sync {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).call(request)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).call(request)
    }
}

fn unexpected(op: Op, got: &BackendResponse) -> BackendError {
    let shape = match got {
        BackendResponse::Detection(_) => "a detection",
        BackendResponse::Scores { .. } => "a score list",
        BackendResponse::Candidates { .. } => "a candidate list",
    };
    BackendError::InvalidResponse(format!("{} returned {shape}", op.as_str()))
}

/// Typed wrappers that build requests and check response shapes.
pub trait BackendExt {
    fn detect(&self, image: &str, object: &str) -> Result<Detection, BackendError>;
    fn ground(&self, image: &str, query: &GroundingQuery) -> Result<Detection, BackendError>;
    fn match_texts(
        &self,
        image: &str,
        region: &RegionSpec,
        texts: &[String],
        intents: Option<&[MatchIntent]>,
    ) -> Result<Vec<f64>, BackendError>;
    fn filter_answers(
        &self,
        template: &str,
        candidates: &[String],
        k: usize,
    ) -> Result<Vec<String>, BackendError>;
}

fn detection_from(op: Op, resp: BackendResponse) -> Result<Detection, BackendError> {
    match resp {
        BackendResponse::Detection(d) => {
            d.check()
                .map_err(|e| BackendError::InvalidResponse(format!("{}: {e}", op.as_str())))?;
            Ok(d)
        }
        other => Err(unexpected(op, &other)),
    }
}

impl<B: Backend + ?Sized> BackendExt for B {
    fn detect(&self, image: &str, object: &str) -> Result<Detection, BackendError> {
        let resp = self.call(&BackendRequest::Detect(DetectRequest {
            image: image.to_string(),
            object: object.to_string(),
        }))?;
        detection_from(Op::Detect, resp)
    }

    fn ground(&self, image: &str, query: &GroundingQuery) -> Result<Detection, BackendError> {
        let resp = self.call(&BackendRequest::Ground(GroundRequest {
            image: image.to_string(),
            sentence: query.sentence.clone(),
            structured: Some(query.structured.clone()),
        }))?;
        detection_from(Op::Ground, resp)
    }

    fn match_texts(
        &self,
        image: &str,
        region: &RegionSpec,
        texts: &[String],
        intents: Option<&[MatchIntent]>,
    ) -> Result<Vec<f64>, BackendError> {
        if texts.is_empty() {
            return Err(BackendError::InvalidRequest("match needs at least one text".into()));
        }
        let resp = self.call(&BackendRequest::Match(MatchRequest {
            image: image.to_string(),
            region: *region,
            texts: texts.to_vec(),
            intents: intents.map(<[MatchIntent]>::to_vec),
        }))?;
        match resp {
            BackendResponse::Scores { scores } => {
                if scores.len() != texts.len() {
                    return Err(BackendError::InvalidResponse(format!(
                        "match returned {} scores for {} texts",
                        scores.len(),
                        texts.len()
                    )));
                }
                if let Some(s) = scores.iter().find(|s| !(s.is_finite() && (0.0..=1.0).contains(*s))) {
                    return Err(BackendError::InvalidResponse(format!(
                        "match score {s} outside [0, 1]"
                    )));
                }
                Ok(scores)
            }
            other => Err(unexpected(Op::Match, &other)),
        }
    }

    fn filter_answers(
        &self,
        template: &str,
        candidates: &[String],
        k: usize,
    ) -> Result<Vec<String>, BackendError> {
        let resp = self.call(&BackendRequest::FilterAnswers(FilterAnswersRequest {
            template: template.to_string(),
            candidates: candidates.to_vec(),
            k,
        }))?;
        match resp {
            BackendResponse::Candidates { candidates } => Ok(candidates),
            other => Err(unexpected(Op::FilterAnswers, &other)),
        }
    }
}
