//! Small backends for driving the executor in tests.

use std::collections::HashMap;
use std::sync::Mutex;

use modvqa_core::backend::{Backend, BackendError, BackendRequest, BackendResponse, Op};
use modvqa_core::geometry::{BoundingBox, Detection};

/// Forwards to `inner` and remembers the op of every call.
pub struct Spy<B> {
    pub inner: B,
    ops: Mutex<Vec<Op>>,
}

impl<B: Backend> Spy<B> {
    pub fn new(inner: B) -> Self {
        Spy {
            inner,
            ops: Mutex::new(Vec::new()),
        }
    }

    pub fn count(&self, op: Op) -> usize {
        self.ops.lock().unwrap().iter().filter(|&&o| o == op).count()
    }

    pub fn reset(&self) {
        self.ops.lock().unwrap().clear();
    }
}

impl<B: Backend> Backend for Spy<B> {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        self.ops.lock().unwrap().push(request.op());
        self.inner.call(request)
    }
}

/// Canned detections keyed by object name (detect) or sentence (ground).
/// The matcher says no to everything; the answer filter keeps a prefix.
#[derive(Default)]
pub struct Fixed {
    pub detections: HashMap<String, Detection>,
}

impl Fixed {
    pub fn with(mut self, key: &str, scores: &[f64]) -> Self {
        let boxes = (0..scores.len())
            .map(|i| BoundingBox {
                x: 0.05 * i as f64,
                y: 0.1,
                w: 0.04,
                h: 0.2,
            })
            .collect();
        self.detections.insert(
            key.to_string(),
            Detection {
                boxes,
                scores: scores.to_vec(),
            },
        );
        self
    }

    fn lookup(&self, key: &str) -> BackendResponse {
        BackendResponse::Detection(self.detections.get(key).cloned().unwrap_or_else(Detection::empty))
    }
}

impl Backend for Fixed {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        Ok(match request {
            BackendRequest::Detect(d) => self.lookup(&d.object),
            BackendRequest::Ground(g) => self.lookup(&g.sentence),
            BackendRequest::Match(m) => BackendResponse::Scores {
                scores: vec![0.0; m.texts.len()],
            },
            BackendRequest::FilterAnswers(f) => BackendResponse::Candidates {
                candidates: f.candidates.iter().take(f.k).cloned().collect(),
            },
        })
    }
}
