//! HTTP mapping of the backend protocol.
//!
//! Each operation is a `POST` of a JSON body to its own path:
//!
//! | path              | request body                                   | success body                       |
//! |-------------------|------------------------------------------------|------------------------------------|
//! | `/detect`         | `{"image","object"}`                           | `{"boxes":[{x,y,w,h}],"scores":[]}` |
//! | `/ground`         | `{"image","sentence","structured"?}`           | same as `/detect`                  |
//! | `/match`          | `{"image","region":{"kind","boxes"},"texts","intents"?}` | `{"scores":[]}`          |
//! | `/filter_answers` | `{"template","candidates","k"}`                | `{"candidates":[]}`                |
//!
//! `GET /health` answers `{"status":"ok"}`. Failures carry a non-2xx status
//! and `{"error":{"kind","message"}}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    BackendError, BackendRequest, BackendResponse, DetectRequest, FilterAnswersRequest,
    GroundRequest, MatchRequest, Op,
};
use crate::geometry::Detection;

pub const HEALTH_PATH: &str = "/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    /// `ok` once every capability can answer.
    pub status: String,
    /// Readiness per operation name; optional for services that only
    /// report the overall status.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capabilities: BTreeMap<String, bool>,
}

impl Health {
    pub fn is_ready(&self) -> bool {
        self.status == "ok" && self.capabilities.values().all(|&ready| ready)
    }
}

#[derive(Serialize, Deserialize)]
struct ScoresBody {
    scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CandidatesBody {
    candidates: Vec<String>,
}

pub fn path_for(op: Op) -> &'static str {
    match op {
        Op::Detect => "/detect",
        Op::Ground => "/ground",
        Op::Match => "/match",
        Op::FilterAnswers => "/filter_answers",
    }
}

pub fn op_for_path(path: &str) -> Option<Op> {
    let path = path.split('?').next().unwrap_or(path);
    match path.trim_end_matches('/') {
        "/detect" => Some(Op::Detect),
        "/ground" => Some(Op::Ground),
        "/match" => Some(Op::Match),
        "/filter_answers" => Some(Op::FilterAnswers),
        _ => None,
    }
}

pub fn status_for(err: &BackendError) -> u16 {
    match err {
        BackendError::UnknownImage(_) => 404,
        BackendError::OracleNeedsStructured(_) => 422,
        BackendError::InvalidRequest(_) => 400,
        BackendError::Unavailable(_) => 503,
        BackendError::InvalidResponse(_) => 502,
    }
}

/// Path and body for a request.
pub fn encode_request(req: &BackendRequest) -> (&'static str, String) {
    let body = match req {
        BackendRequest::Detect(r) => serde_json::to_string(r),
        BackendRequest::Ground(r) => serde_json::to_string(r),
        BackendRequest::Match(r) => serde_json::to_string(r),
        BackendRequest::FilterAnswers(r) => serde_json::to_string(r),
    };
    (path_for(req.op()), body.expect("request types always serialize"))
}

pub fn decode_request(op: Op, body: &str) -> Result<BackendRequest, BackendError> {
    let bad = |e: serde_json::Error| BackendError::InvalidRequest(format!("{}: {e}", op.as_str()));
    Ok(match op {
        Op::Detect => BackendRequest::Detect(serde_json::from_str::<DetectRequest>(body).map_err(bad)?),
        Op::Ground => BackendRequest::Ground(serde_json::from_str::<GroundRequest>(body).map_err(bad)?),
        Op::Match => BackendRequest::Match(serde_json::from_str::<MatchRequest>(body).map_err(bad)?),
        Op::FilterAnswers => BackendRequest::FilterAnswers(
            serde_json::from_str::<FilterAnswersRequest>(body).map_err(bad)?,
        ),
    })
}

/// Status code and body for an outcome.
pub fn encode_response(outcome: &Result<BackendResponse, BackendError>) -> (u16, String) {
    match outcome {
        Ok(resp) => (
            200,
            serde_json::to_string(resp).expect("responses always serialize"),
        ),
        Err(e) => encode_error(e),
    }
}

pub fn encode_error(err: &BackendError) -> (u16, String) {
    let body = ErrorBody { error: err.clone() };
    (
        status_for(err),
        serde_json::to_string(&body).expect("errors always serialize"),
    )
}

/// Decodes a response body using the shape the operation promises, so an
/// empty detection is never mistaken for something else.
pub fn decode_response(
    op: Op,
    status: u16,
    body: &str,
) -> Result<Result<BackendResponse, BackendError>, BackendError> {
    let bad = |e: serde_json::Error| {
        BackendError::InvalidResponse(format!("{} (status {status}): {e}", op.as_str()))
    };
    if !(200..300).contains(&status) {
        return match serde_json::from_str::<ErrorBody>(body) {
            Ok(b) => Ok(Err(b.error)),
            Err(_) => Err(BackendError::InvalidResponse(format!(
                "{} returned status {status}: {}",
                op.as_str(),
                body.chars().take(200).collect::<String>()
            ))),
        };
    }
    Ok(Ok(match op {
        Op::Detect | Op::Ground => {
            BackendResponse::Detection(serde_json::from_str::<Detection>(body).map_err(bad)?)
        }
        Op::Match => BackendResponse::Scores {
            scores: serde_json::from_str::<ScoresBody>(body).map_err(bad)?.scores,
        },
        Op::FilterAnswers => BackendResponse::Candidates {
            candidates: serde_json::from_str::<CandidatesBody>(body)
                .map_err(bad)?
                .candidates,
        },
    }))
}

/// Health body for a backend whose four operations are all ready.
pub fn health_ok() -> String {
    let capabilities = [Op::Detect, Op::Ground, Op::Match, Op::FilterAnswers]
        .iter()
        .map(|op| (op.as_str().to_string(), true))
        .collect();
    serde_json::to_string(&Health {
        status: "ok".into(),
        capabilities,
    })
    .expect("health serializes")
}
