//! Chat-completion backends.
//!
//! [`HttpBackend`] talks to any OpenAI-compatible server. [`ScriptedBackend`]
//! replays canned responses and counts calls, which is what the tests and
//! the offline CLI modes use.

mod http;
mod scripted;

use std::time::Duration;

use thiserror::Error;

use crate::prompting::{ChatMessage, Role};

pub use http::HttpBackend;
pub use scripted::{message_key, ScriptError, ScriptedBackend};

pub const ENV_BASE_URL: &str = "CLEARLINE_BASE_URL";
pub const ENV_API_KEY: &str = "CLEARLINE_API_KEY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("upstream error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Upstream {
        status: Option<u16>,
        message: String,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub base_url: String,
    pub model_name: String,
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub retry_backoff: Duration,
    /// Extra top-level request fields (temperature etc.). `None` leaves the
    /// server's inference defaults untouched.
    pub sampling_overrides: Option<serde_json::Map<String, serde_json::Value>>,
    pub api_key: Option<String>,
}

impl BackendConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            request_timeout: Duration::from_secs(120),
            max_retries: 2,
            retry_backoff: Duration::from_millis(500),
            sampling_overrides: None,
            api_key: None,
        }
    }

    /// Fills the API key from the environment, and the base URL too when the
    /// configured one is empty.
    pub fn with_env(mut self) -> Self {
        if self.base_url.trim().is_empty() {
            if let Ok(url) = std::env::var(ENV_BASE_URL) {
                self.base_url = url;
            }
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.request_timeout.is_zero() {
            return Err(BackendError::InvalidRequest(
                "request timeout must be positive".into(),
            ));
        }
        if self.base_url.trim().is_empty() {
            return Err(BackendError::InvalidRequest("base URL is not set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    pub latency: Duration,
}

/// A chat-completion service. Implementations must tolerate concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, BackendError>;

    /// True when responses depend on call order, so callers that want
    /// reproducible results must issue requests sequentially.
    fn is_order_sensitive(&self) -> bool {
        false
    }

    /// Cheap reachability check.
    fn probe(&self, _timeout: Duration) -> bool {
        true
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, BackendError> {
        (**self).complete(messages)
    }

    fn is_order_sensitive(&self) -> bool {
        (**self).is_order_sensitive()
    }

    fn probe(&self, timeout: Duration) -> bool {
        (**self).probe(timeout)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, BackendError> {
        (**self).complete(messages)
    }

    fn is_order_sensitive(&self) -> bool {
        (**self).is_order_sensitive()
    }

    fn probe(&self, timeout: Duration) -> bool {
        (**self).probe(timeout)
    }
}

pub(crate) fn check_ends_with_user(messages: &[ChatMessage]) -> Result<&str, BackendError> {
    match messages.last() {
        Some(m) if m.role == Role::User => Ok(&m.content),
        _ => Err(BackendError::InvalidRequest(
            "conversation must end with a user message".into(),
        )),
    }
}
