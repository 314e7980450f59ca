use std::time::Duration;

use super::wire::{self, Health, HEALTH_PATH};
use super::{Backend, BackendError, BackendRequest, BackendResponse};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Forwards requests to a model service over HTTP. One attempt per
/// request; transport failures surface as [`BackendError::Unavailable`].
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(base_url: &str) -> RemoteBackend {
        RemoteBackend::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> RemoteBackend {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Fetches `/health`; a service that answers but is not ready is
    /// reported as unavailable.
    pub fn health(&self) -> Result<Health, BackendError> {
        let url = format!("{}{HEALTH_PATH}", self.base_url);
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| BackendError::Unavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| BackendError::Unavailable(format!("{url}: reading body: {e}")))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Unavailable(format!("{url} returned status {status}")));
        }
        let health: Health = serde_json::from_str(&text)
            .map_err(|e| BackendError::InvalidResponse(format!("{url}: {e}")))?;
        if !health.is_ready() {
            return Err(BackendError::Unavailable(format!("{url}: not ready: {text}")));
        }
        Ok(health)
    }
}

impl Backend for RemoteBackend {
    fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let (path, body) = wire::encode_request(request);
        let url = format!("{}{path}", self.base_url);
        log::debug!("POST {url}");
        let resp = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body.as_bytes())
            .map_err(|e| BackendError::Unavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| BackendError::Unavailable(format!("{url}: reading body: {e}")))?;
        wire::decode_response(request.op(), status, &text)?
    }
}
