//! Language-model backends with uniform token and latency accounting.
//!
//! Two implementations share the [`Backend`] trait: a deterministic
//! [`scripted::ScriptedBackend`] that replays configured responses for tests
//! and offline evaluation, and an OpenAI-compatible [`http::HttpBackend`]
//! for live runs. [`signals::parse_signals`] extracts the clipped heuristic
//! control signals (per-action expected gain, uncertainty) that drive the
//! policy loop.

mod http;
mod scripted;
mod signals;

pub use http::{HttpBackend, HttpBackendConfig};
pub use scripted::{load_script, ScriptEntry, ScriptedBackend};
pub use signals::{parse_signals, SignalEstimate};

pub(crate) use signals::{find_control_block, find_object_with_key};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failures any backend can report, grouped by category.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("non-success status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("script exhausted: no remaining entry matches the request")]
    ScriptExhausted,
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
}

impl BackendError {
    /// Stable category slug for logs and error summaries.
    pub fn category(&self) -> &'static str {
        match self {
            BackendError::InvalidRequest(_) => "invalid_request",
            BackendError::Transport(_) => "transport",
            BackendError::Status { .. } => "status",
            BackendError::MalformedResponse(_) => "malformed_response",
            BackendError::ScriptExhausted => "script_exhausted",
            BackendError::InvalidScript(_) => "invalid_script",
            BackendError::MissingApiKey(_) => "missing_api_key",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

/// One completion request. Construct with [`BackendRequest::new`] and adjust
/// via the `with_*` builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub messages: Vec<Message>,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl BackendRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        BackendRequest { messages, max_output_tokens: 512, temperature: 0.0 }
    }

    pub fn with_max_output_tokens(mut self, max_output_tokens: u32) -> Self {
        self.max_output_tokens = max_output_tokens;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("at least one message required".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        Ok(())
    }
}

/// One completion with usage accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_seconds: f64,
}

impl BackendResponse {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// A completion provider. Implementations never mutate the request and must
/// be safe for concurrent use by independent episodes.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

/// Whitespace-token count used whenever a backend does not report usage.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Where episode backends come from. Scripted sources hand every episode a
/// fresh replay cursor; HTTP sources share one rate-limited client.
#[derive(Clone)]
pub enum BackendSource {
    Scripted(Arc<Vec<ScriptEntry>>),
    Http(Arc<HttpBackend>),
}

impl BackendSource {
    pub fn scripted(entries: Vec<ScriptEntry>) -> Self {
        BackendSource::Scripted(Arc::new(entries))
    }

    /// A backend owned by one episode.
    pub fn episode_backend(&self) -> EpisodeBackend {
        match self {
            BackendSource::Scripted(entries) => {
                EpisodeBackend::Scripted(ScriptedBackend::new(entries.as_ref().clone()))
            }
            BackendSource::Http(backend) => EpisodeBackend::Shared(Arc::clone(backend)),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendSource::Scripted(_) => "scripted",
            BackendSource::Http(_) => "http",
        }
    }
}

/// Per-episode backend handle.
pub enum EpisodeBackend {
    Scripted(ScriptedBackend),
    Shared(Arc<HttpBackend>),
}

impl Backend for EpisodeBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        match self {
            EpisodeBackend::Scripted(backend) => backend.complete(request),
            EpisodeBackend::Shared(backend) => backend.complete(request),
        }
    }
}
