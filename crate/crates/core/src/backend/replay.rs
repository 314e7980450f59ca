use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse};

/// One request and what the backend said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub request: BackendRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<BackendResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BackendError>,
}

impl RecordedCall {
    pub fn outcome(&self) -> Result<BackendResponse, BackendError> {
        match (&self.response, &self.error) {
            (Some(r), _) => Ok(r.clone()),
            (None, Some(e)) => Err(e.clone()),
            (None, None) => Err(BackendError::InvalidResponse(
                "recorded call has neither response nor error".into(),
            )),
        }
    }
}

/// Passes calls through and keeps a log of them.
pub struct RecordingBackend<B> {
    inner: B,
    calls: Mutex<Vec<RecordedCall>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> RecordingBackend<B> {
        RecordingBackend {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().expect("recording lock").clone()
    }

    pub fn into_replay(self) -> ReplayBackend {
        ReplayBackend::new(self.calls.into_inner().expect("recording lock"))
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let outcome = self.inner.call(request);
        let (response, error) = match &outcome {
            Ok(r) => (Some(r.clone()), None),
            Err(e) => (None, Some(e.clone())),
        };
        self.calls.lock().expect("recording lock").push(RecordedCall {
            request: request.clone(),
            response,
            error,
        });
        outcome
    }
}

/// Answers from a recording, keyed by the request's JSON encoding. A
/// request that was never recorded is an error.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    table: HashMap<String, RecordedCall>,
}

fn key(request: &BackendRequest) -> String {
    serde_json::to_string(request).expect("requests always serialize")
}

impl ReplayBackend {
    pub fn new(calls: impl IntoIterator<Item = RecordedCall>) -> ReplayBackend {
        ReplayBackend {
            table: calls.into_iter().map(|c| (key(&c.request), c)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Reads one [`RecordedCall`] per line.
    pub fn from_jsonl(text: &str) -> Result<ReplayBackend, serde_json::Error> {
        let calls = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<RecordedCall>)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ReplayBackend::new(calls))
    }
}

/// One JSON document per line.
pub fn calls_to_jsonl(calls: &[RecordedCall]) -> String {
    calls
        .iter()
        .map(|c| serde_json::to_string(c).expect("calls always serialize") + "\n")
        .collect()
}

impl Backend for ReplayBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        match self.table.get(&key(request)) {
            Some(c) => c.outcome(),
            None => Err(BackendError::Unavailable(format!(
                "no recorded {} response for this request",
                request.op().as_str()
            ))),
        }
    }
}
