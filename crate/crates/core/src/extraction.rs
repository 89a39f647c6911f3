//! Constrained-output parsing and the two-step extraction pipeline.
//!
//! Step one asks the model for a topic from the corpus topic list. Step two
//! asks it, `ensemble_size` times, for the line numbers of the minimum
//! relevant lines of that topic's guideline. Malformed line responses are
//! rejected whole and retried; the valid runs are merged by set union.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend};
use crate::corpus::{canonical_topic, render_numbered_context, Corpus};
use crate::exec::Execution;
use crate::prompting::{build_line_prompt, build_topic_prompt, PromptError, ShotStore, Step};

/// Sorted, duplicate-free line indices.
pub type LineSet = BTreeSet<usize>;

pub const DEFAULT_THINK_DELIMITER: &str = "</think>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopicParseError {
    #[error("response '{raw}' does not name a listed topic")]
    UnrecognizedTopic { raw: String },
    #[error("response '{raw}' matches more than one topic")]
    AmbiguousTopic { raw: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LineParseError {
    #[error("token '{token}' is not a line number")]
    MalformedToken { token: String },
    #[error("line {token} is out of range for a guideline of {line_count} lines")]
    OutOfRange { token: String, line_count: usize },
    #[error("response contains no line numbers")]
    EmptySelection,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("unrecognized topic in model response '{raw}'")]
    UnrecognizedTopic { raw: String },
    #[error("unknown topic override '{0}'")]
    UnknownTopicOverride(String),
    #[error("{step:?} backend call failed: {source}")]
    Backend {
        step: Step,
        #[source]
        source: BackendError,
    },
    #[error("{step:?} produced no valid response after {attempts} attempts (last: {last_error})")]
    PipelineExhausted {
        step: Step,
        attempts: usize,
        last_error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicDecision {
    pub topic_id: String,
    pub raw_response: String,
    /// True when the topic came from an explicit override rather than the model.
    #[serde(default)]
    pub overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSelection {
    pub indices: LineSet,
    pub raw_response: String,
    pub reasoning_trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedResponse {
    pub run: usize,
    pub raw_response: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub topic_seconds: f64,
    pub lines_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub topic: TopicDecision,
    /// Valid line-step runs, in run order.
    pub runs: Vec<LineSelection>,
    pub consolidated: LineSet,
    pub rejected: Vec<RejectedResponse>,
    pub timings: StepTimings,
}

impl ExtractionResult {
    /// First reasoning trace among the runs, if the model produced any.
    pub fn reasoning_trace(&self) -> Option<&str> {
        self.runs.iter().find_map(|r| r.reasoning_trace.as_deref())
    }
}

fn strip_trailing_punctuation(s: &str) -> &str {
    s.strip_suffix('.')
        .or_else(|| s.strip_suffix('!'))
        .unwrap_or(s)
}

/// Matches a topic-step response against the topic list.
///
/// The response is trimmed, one trailing `.` or `!` is dropped, and the
/// result must equal exactly one topic after case folding. The returned
/// decision carries the topic list's own spelling.
pub fn parse_topic_response(
    raw: &str,
    topics: &[String],
) -> Result<TopicDecision, TopicParseError> {
    let wanted = canonical_topic(strip_trailing_punctuation(raw.trim()));
    let mut matches = topics.iter().filter(|t| canonical_topic(t) == wanted);
    let Some(first) = matches.next() else {
        return Err(TopicParseError::UnrecognizedTopic { raw: raw.into() });
    };
    if matches.next().is_some() {
        return Err(TopicParseError::AmbiguousTopic { raw: raw.into() });
    }
    Ok(TopicDecision {
        topic_id: first.clone(),
        raw_response: raw.into(),
        overridden: false,
    })
}

/// Splits a reasoning model's output at the first `close_delimiter`.
///
/// Returns `(Some(trace), payload)` when the delimiter is present, so that
/// `trace + close_delimiter + payload == raw`, otherwise `(None, raw)`.
pub fn split_reasoning<'a>(raw: &'a str, close_delimiter: &str) -> (Option<&'a str>, &'a str) {
    if close_delimiter.is_empty() {
        return (None, raw);
    }
    match raw.split_once(close_delimiter) {
        Some((trace, payload)) => (Some(trace), payload),
        None => (None, raw),
    }
}

/// Parses a line-step payload such as `1`, `0 1`, `[0 1]` or `0, 1`.
///
/// Any token that is not a plain base-10 integer, or that is not a valid
/// line index, rejects the whole response.
pub fn parse_line_response(payload: &str, line_count: usize) -> Result<LineSet, LineParseError> {
    let mut body = payload.trim();
    if let Some(rest) = body.strip_prefix('[') {
        body = rest;
    }
    if let Some(rest) = body.strip_suffix(']') {
        body = rest;
    }
    let mut indices = LineSet::new();
    for token in body
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
    {
        if !token.bytes().all(|b| b.is_ascii_digit()) {
            return Err(LineParseError::MalformedToken {
                token: token.into(),
            });
        }
        let out_of_range = || LineParseError::OutOfRange {
            token: token.into(),
            line_count,
        };
        let index: usize = token.parse().map_err(|_| out_of_range())?;
        if index >= line_count {
            return Err(out_of_range());
        }
        indices.insert(index);
    }
    if indices.is_empty() {
        return Err(LineParseError::EmptySelection);
    }
    Ok(indices)
}

/// Set union of every run's indices.
pub fn consolidate(runs: &[LineSelection]) -> LineSet {
    runs.iter()
        .flat_map(|r| r.indices.iter().copied())
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub ensemble_size: usize,
    /// Extra attempts allowed per run after a malformed line response.
    pub max_retries_per_step: usize,
    /// Skip the topic step and use this topic.
    pub topic_override: Option<String>,
    pub shots: ShotStore,
    pub think_delimiter: String,
    pub execution: Execution,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            ensemble_size: 1,
            max_retries_per_step: 1,
            topic_override: None,
            shots: ShotStore::bundled(),
            think_delimiter: DEFAULT_THINK_DELIMITER.into(),
            execution: Execution::default(),
        }
    }
}

impl PipelineOptions {
    pub fn with_ensemble(mut self, ensemble_size: usize) -> Self {
        self.ensemble_size = ensemble_size;
        self
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.max_retries_per_step = retries;
        self
    }

    pub fn with_topic_override(mut self, topic: impl Into<String>) -> Self {
        self.topic_override = Some(topic.into());
        self
    }

    pub fn with_shots(mut self, shots: ShotStore) -> Self {
        self.shots = shots;
        self
    }
}

enum RunOutcome {
    Valid(LineSelection, Vec<RejectedResponse>),
    Exhausted(Vec<RejectedResponse>),
}

/// Runs topic identification then line identification for one question.
pub fn run_pipeline(
    question: &str,
    corpus: &Corpus,
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
) -> Result<ExtractionResult, PipelineError> {
    let started = Instant::now();
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let ensemble = options.ensemble_size.max(1);

    let topic = match &options.topic_override {
        Some(wanted) => {
            let g = corpus
                .get(wanted)
                .ok_or_else(|| PipelineError::UnknownTopicOverride(wanted.clone()))?;
            TopicDecision {
                topic_id: g.topic_id().to_string(),
                raw_response: String::new(),
                overridden: true,
            }
        }
        None => {
            let bundle = build_topic_prompt(
                question,
                corpus.topics(),
                options.shots.for_step(Step::TopicIdentification),
            )?;
            let reply =
                backend
                    .complete(&bundle.messages)
                    .map_err(|source| PipelineError::Backend {
                        step: Step::TopicIdentification,
                        source,
                    })?;
            let (_, payload) = split_reasoning(&reply.text, &options.think_delimiter);
            let mut decision = parse_topic_response(payload, corpus.topics()).map_err(|_| {
                PipelineError::UnrecognizedTopic {
                    raw: reply.text.clone(),
                }
            })?;
            decision.raw_response = reply.text;
            decision
        }
    };
    let topic_seconds = if topic.overridden {
        0.0
    } else {
        started.elapsed().as_secs_f64()
    };

    let lines_started = Instant::now();
    let guideline = corpus
        .get(&topic.topic_id)
        .expect("decided topic is in the corpus");
    let line_count = guideline.len();
    let bundle = build_line_prompt(
        question,
        &render_numbered_context(guideline),
        options.shots.for_step(Step::LineIdentification),
    )?;

    let one_run = |run: usize| -> Result<RunOutcome, PipelineError> {
        let mut rejected = Vec::new();
        for _ in 0..=options.max_retries_per_step {
            let reply =
                backend
                    .complete(&bundle.messages)
                    .map_err(|source| PipelineError::Backend {
                        step: Step::LineIdentification,
                        source,
                    })?;
            let (trace, payload) = split_reasoning(&reply.text, &options.think_delimiter);
            let indices = match parse_line_response(payload, line_count) {
                Ok(indices) => indices,
                Err(LineParseError::EmptySelection) => LineSet::new(),
                Err(e) => {
                    rejected.push(RejectedResponse {
                        run,
                        raw_response: reply.text,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let selection = LineSelection {
                indices,
                reasoning_trace: trace.map(str::to_owned),
                raw_response: reply.text,
            };
            return Ok(RunOutcome::Valid(selection, rejected));
        }
        Ok(RunOutcome::Exhausted(rejected))
    };

    let execution = if backend.is_order_sensitive() {
        Execution::Sequential
    } else {
        options.execution
    };
    let mut runs = Vec::with_capacity(ensemble);
    let mut rejected = Vec::new();
    for outcome in execution.map(ensemble, one_run) {
        match outcome? {
            RunOutcome::Valid(selection, r) => {
                runs.push(selection);
                rejected.extend(r);
            }
            RunOutcome::Exhausted(r) => rejected.extend(r),
        }
    }
    if runs.is_empty() {
        return Err(PipelineError::PipelineExhausted {
            step: Step::LineIdentification,
            attempts: rejected.len(),
            last_error: rejected
                .last()
                .map(|r| r.reason.clone())
                .unwrap_or_default(),
        });
    }
    let consolidated = consolidate(&runs);
    Ok(ExtractionResult {
        topic,
        runs,
        consolidated,
        rejected,
        timings: StepTimings {
            topic_seconds,
            lines_seconds: lines_started.elapsed().as_secs_f64(),
            total_seconds: started.elapsed().as_secs_f64(),
        },
    })
}
