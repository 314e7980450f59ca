//! Protocol checks a model service must pass: shapes, bounds, and error
//! bodies for a fixed list of requests, plus a ready `/health`.
//!
//! Fixtures are JSON lines:
//!
//! ```json
//! {"name":"detect car","request":{"op":"detect","image":"kitchen-01","object":"cup"},"expect":"detection"}
//! ```
//!
//! `expect` is `detection`, `scores`, `candidates` or `error`.

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse, RemoteBackend};

static BUILTIN: &str = include_str!("../../data/protocol_fixtures.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Detection,
    Scores,
    Candidates,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub request: BackendRequest,
    pub expect: Expect,
}

impl Fixture {
    /// Points the fixture at another image, for services with their own store.
    pub fn with_image(mut self, image: &str) -> Fixture {
        match &mut self.request {
            BackendRequest::Detect(r) => r.image = image.to_string(),
            BackendRequest::Ground(r) => r.image = image.to_string(),
            BackendRequest::Match(r) => r.image = image.to_string(),
            BackendRequest::FilterAnswers(_) => {}
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// The fixtures shipped with the crate; they reference the mini-dataset images.
pub fn builtin_fixtures() -> Vec<Fixture> {
    parse_fixtures(BUILTIN).expect("builtin fixtures parse")
}

fn unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

/// Checks one outcome against what the fixture promises.
pub fn check_outcome(
    fixture: &Fixture,
    outcome: &Result<BackendResponse, BackendError>,
) -> Result<(), String> {
    match (fixture.expect, outcome) {
        (Expect::Error, Err(BackendError::Unavailable(m))) => Err(format!("transport failure: {m}")),
        (Expect::Error, Err(_)) => Ok(()),
        (Expect::Error, Ok(r)) => Err(format!("expected an error, got {r:?}")),
        (_, Err(e)) => Err(e.to_string()),
        (Expect::Detection, Ok(BackendResponse::Detection(d))) => {
            d.check().map_err(|e| e.to_string())?;
            match d.boxes.iter().find(|b| !b.is_valid()) {
                Some(b) => Err(format!("box {b:?} leaves the unit square")),
                None => Ok(()),
            }
        }
        (Expect::Scores, Ok(BackendResponse::Scores { scores })) => {
            let BackendRequest::Match(m) = &fixture.request else {
                return Err("scores fixture must send a match request".into());
            };
            if scores.len() != m.texts.len() {
                return Err(format!("{} scores for {} texts", scores.len(), m.texts.len()));
            }
            match scores.iter().find(|&&s| !unit(s)) {
                Some(s) => Err(format!("score {s} outside [0, 1]")),
                None => Ok(()),
            }
        }
        (Expect::Candidates, Ok(BackendResponse::Candidates { candidates })) => {
            let BackendRequest::FilterAnswers(f) = &fixture.request else {
                return Err("candidates fixture must send a filter_answers request".into());
            };
            if candidates.len() > f.k {
                return Err(format!("{} candidates for k = {}", candidates.len(), f.k));
            }
            match candidates.iter().find(|c| !f.candidates.contains(c)) {
                Some(c) => Err(format!("`{c}` was not offered")),
                None => Ok(()),
            }
        }
        (want, Ok(got)) => Err(format!("expected {want:?}, got {got:?}")),
    }
}

/// Runs every fixture against `backend`.
pub fn run_fixtures(backend: &dyn Backend, fixtures: &[Fixture]) -> Vec<CheckResult> {
    fixtures
        .iter()
        .map(|f| {
            let outcome = backend.call(&f.request);
            let verdict = check_outcome(f, &outcome);
            CheckResult {
                name: f.name.clone(),
                passed: verdict.is_ok(),
                detail: verdict.err().unwrap_or_default(),
            }
        })
        .collect()
}

/// `/health` first, then the fixtures.
pub fn run_conformance(service: &RemoteBackend, fixtures: &[Fixture]) -> Vec<CheckResult> {
    let health = service.health();
    let mut results = vec![CheckResult {
        name: "health".into(),
        passed: health.is_ok(),
        detail: health.err().map(|e| e.to_string()).unwrap_or_default(),
    }];
    results.extend(run_fixtures(service, fixtures));
    results
}
