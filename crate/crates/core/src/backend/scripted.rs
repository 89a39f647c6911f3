use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{check_ends_with_user, BackendError, ChatBackend, CompletionResult};
use crate::prompting::ChatMessage;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid script: {0}")]
    Format(String),
}

/// SHA-256 (lowercase hex) of a final user message; the key used by keyed scripts.
pub fn message_key(final_user_message: &str) -> String {
    hex::encode(Sha256::digest(final_user_message.as_bytes()))
}

#[derive(Debug)]
enum Reply {
    /// Returned for every matching call.
    Fixed(String),
    /// Popped one per call.
    Queue(VecDeque<String>),
}

#[derive(Debug)]
enum Script {
    Sequence(VecDeque<String>),
    Keyed(HashMap<String, Reply>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReplyFile {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Sequence(Vec<String>),
    Keyed(HashMap<String, ReplyFile>),
}

/// Deterministic backend replaying canned responses.
///
/// A sequence script pops one response per call regardless of the prompt.
/// A keyed script looks the reply up by [`message_key`] of the final user
/// message. Running out of responses yields an `Upstream` error.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Mutex<Script>,
    calls: AtomicUsize,
    received: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn sequence<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_script(Script::Sequence(
            responses.into_iter().map(Into::into).collect(),
        ))
    }

    /// Keyed script from `(final user message, replies)` pairs. A single
    /// reply is returned on every call; several are returned in order.
    pub fn keyed<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let map = entries
            .into_iter()
            .map(|(message, replies)| (message_key(&message), reply_from(replies)))
            .collect();
        Self::with_script(Script::Keyed(map))
    }

    /// Parses a script file: a JSON array is a sequence script; a JSON object
    /// maps message keys to a reply string or an array of replies.
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| ScriptError::Format(e.to_string()))?;
        Ok(match file {
            ScriptFile::Sequence(items) => Self::sequence(items),
            ScriptFile::Keyed(map) => Self::with_script(Script::Keyed(
                map.into_iter()
                    .map(|(k, v)| {
                        let reply = match v {
                            ReplyFile::One(s) => Reply::Fixed(s),
                            ReplyFile::Many(v) => Reply::Queue(v.into()),
                        };
                        (k.to_ascii_lowercase(), reply)
                    })
                    .collect(),
            )),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    fn with_script(script: Script) -> Self {
        Self {
            script: Mutex::new(script),
            calls: AtomicUsize::new(0),
            received: Mutex::new(Vec::new()),
        }
    }

    /// Number of `complete` calls so far, failed ones included.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Final user messages in the order they were received.
    pub fn received(&self) -> Vec<String> {
        self.received
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn next_reply(&self, final_message: &str) -> Option<String> {
        let mut script = self.script.lock().unwrap_or_else(|e| e.into_inner());
        match &mut *script {
            Script::Sequence(queue) => queue.pop_front(),
            Script::Keyed(map) => match map.get_mut(&message_key(final_message))? {
                Reply::Fixed(s) => Some(s.clone()),
                Reply::Queue(q) => q.pop_front(),
            },
        }
    }
}

fn reply_from(mut replies: Vec<String>) -> Reply {
    if replies.len() == 1 {
        Reply::Fixed(replies.pop().expect("len checked"))
    } else {
        Reply::Queue(replies.into())
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<CompletionResult, BackendError> {
        let started = Instant::now();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let final_message = check_ends_with_user(messages)?;
        self.received
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(final_message.to_string());
        let text = self
            .next_reply(final_message)
            .ok_or_else(|| BackendError::Upstream {
                status: None,
                message: "no scripted response".into(),
            })?;
        Ok(CompletionResult {
            text,
            latency: started.elapsed(),
        })
    }

    fn is_order_sensitive(&self) -> bool {
        match &*self.script.lock().unwrap_or_else(|e| e.into_inner()) {
            Script::Sequence(_) => true,
            Script::Keyed(map) => map.values().any(|r| matches!(r, Reply::Queue(_))),
        }
    }
}
