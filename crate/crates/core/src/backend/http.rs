use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde::Serialize;
use serde_json::Value;
use tracing::warn;

use super::{check_ends_with_user, BackendConfig, BackendError, ChatBackend, CompletionResult};
use crate::prompting::ChatMessage;

/// OpenAI-compatible `/v1/chat/completions` client.
///
/// Only transport failures (connect errors, timeouts) are retried. A
/// response that arrives is returned or surfaced as an error, never retried.
pub struct HttpBackend {
    client: Client,
    config: BackendConfig,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model_name)
            .field("has_api_key", &self.config.api_key.is_some())
            .finish()
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(flatten)]
    overrides: Option<&'a serde_json::Map<String, Value>>,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let client = Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { client, config })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, body: &RequestBody<'_>) -> Result<String, BackendError> {
        let mut request = self
            .client
            .post(self.url("/v1/chat/completions"))
            .json(body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            let mut message = text;
            let mut cut = message.len().min(512);
            while !message.is_char_boundary(cut) {
                cut -= 1;
            }
            message.truncate(cut);
            return Err(BackendError::Upstream {
                status: Some(status.as_u16()),
                message,
            });
        }
        extract_content(&text)
    }
}

fn extract_content(body: &str) -> Result<String, BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::Protocol("missing choices[0].message.content".into()))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, BackendError> {
        check_ends_with_user(messages)?;
        let body = RequestBody {
            model: &self.config.model_name,
            messages,
            overrides: self.config.sampling_overrides.as_ref(),
        };
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Ok(text) => {
                    return Ok(CompletionResult {
                        text,
                        latency: started.elapsed(),
                    })
                }
                Err(BackendError::Transport(reason)) if attempt < self.config.max_retries => {
                    let delay = self.config.retry_backoff * 2u32.saturating_pow(attempt);
                    warn!(attempt, ?delay, %reason, "chat completion failed, retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn probe(&self, timeout: Duration) -> bool {
        let mut request = self.client.get(self.url("/v1/models")).timeout(timeout);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        request.send().is_ok()
    }
}
