//! OpenAI-compatible HTTP backend for live runs.
//!
//! Speaks the chat-completions wire format: POST `{model, messages,
//! temperature, max_tokens}`, read `choices[0].message.content` plus
//! `usage.prompt_tokens` / `usage.completion_tokens`, estimating tokens by
//! whitespace count when the server omits usage. Transient failures
//! (transport errors, HTTP 429, HTTP 5xx) are retried exactly once after a
//! backoff; anything else fails immediately. A small semaphore caps
//! in-flight requests across all episodes sharing the backend.
//!
//! The API key is read from a configurable environment variable at
//! construction time and is never serialized anywhere.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, Backend, BackendError, BackendRequest, BackendResponse};

/// Connection settings for the HTTP backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Model name sent with every request.
    pub model: String,
    /// Name of the environment variable holding the API key; `None` sends
    /// no Authorization header.
    pub api_key_env: Option<String>,
    /// Maximum concurrent requests.
    pub max_in_flight: usize,
    pub timeout_seconds: u64,
    /// Delay before the single retry of a transient failure.
    pub retry_backoff_ms: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: None,
            max_in_flight: 4,
            timeout_seconds: 60,
            retry_backoff_ms: 500,
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { permits: Mutex::new(permits.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut permits = self.permits.lock().expect("gate poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("gate poisoned");
        }
        *permits -= 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.permits.lock().expect("gate poisoned") += 1;
        self.gate.available.notify_one();
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct ApiChoice {
    message: ApiMessage,
}

#[derive(Deserialize)]
struct ApiMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

enum Attempt {
    Success(reqwest::blocking::Response),
    Transient(BackendError),
    Fatal(BackendError),
}

/// Shared, rate-limited OpenAI-compatible client.
pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl std::fmt::Debug for HttpBackend {
    /// The key itself is deliberately absent from debug output.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(HttpBackend { config, api_key, client, gate })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut post = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            post = post.bearer_auth(key);
        }
        match post.send() {
            Err(e) => Attempt::Transient(BackendError::Transport(e.to_string())),
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    Attempt::Success(response)
                } else {
                    let code = status.as_u16();
                    let body = response.text().unwrap_or_default();
                    let error = BackendError::Status { code, body };
                    if code == 429 || (500..600).contains(&code) {
                        Attempt::Transient(error)
                    } else {
                        Attempt::Fatal(error)
                    }
                }
            }
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        request.validate()?;
        let _permit = self.gate.acquire();
        let messages: Vec<WireMessage<'_>> = request
            .messages
            .iter()
            .map(|m| WireMessage {
                role: match m.role {
                    super::Role::System => "system",
                    super::Role::User => "user",
                    super::Role::Assistant => "assistant",
                },
                content: &m.content,
            })
            .collect();
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });

        let started = Instant::now();
        let response = match self.attempt(&body) {
            Attempt::Success(response) => response,
            Attempt::Fatal(error) => return Err(error),
            Attempt::Transient(_) => {
                std::thread::sleep(Duration::from_millis(self.config.retry_backoff_ms));
                match self.attempt(&body) {
                    Attempt::Success(response) => response,
                    Attempt::Fatal(error) | Attempt::Transient(error) => return Err(error),
                }
            }
        };
        let parsed: ApiResponse = response
            .json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let latency_seconds = started.elapsed().as_secs_f64();

        let text = parsed
            .choices
            .first()
            .and_then(|choice| choice.message.content.clone())
            .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))?;
        let usage = parsed.usage.unwrap_or(ApiUsage { prompt_tokens: None, completion_tokens: None });
        let prompt_tokens = usage.prompt_tokens.unwrap_or_else(|| {
            request.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
        });
        let completion_tokens = usage.completion_tokens.unwrap_or_else(|| estimate_tokens(&text));
        Ok(BackendResponse { text, prompt_tokens, completion_tokens, latency_seconds })
    }
}
