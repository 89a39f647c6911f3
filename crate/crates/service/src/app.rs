//! Router, shared state and handlers.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clearline_core::answer::{assemble_answer, Answer};
use clearline_core::eval::{AnnotationRecord, TaskKind};
use clearline_core::extraction::{LineSet, StepTimings};
use clearline_core::jsonl::JsonlWriter;
use clearline_core::{run_pipeline, ChatBackend, Corpus, PipelineError, PipelineOptions};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{error, info};

use crate::log::InteractionRecord;

const MAX_ENSEMBLE: usize = 16;
const PROBE_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub question_id: String,
    pub question: String,
    pub answer: Answer,
    pub timings: StepTimings,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub exchanges: Vec<Exchange>,
}

/// Shared, cheaply clonable service state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    corpus: Arc<Corpus>,
    backend: Arc<dyn ChatBackend>,
    options: PipelineOptions,
    sessions: Mutex<IndexMap<String, Session>>,
    interaction_log: Option<JsonlWriter>,
    annotation_log: Option<JsonlWriter>,
}

impl AppState {
    pub fn new(corpus: Corpus, backend: Arc<dyn ChatBackend>, options: PipelineOptions) -> Self {
        Self {
            inner: Arc::new(Inner {
                corpus: Arc::new(corpus),
                backend,
                options,
                sessions: Mutex::new(IndexMap::new()),
                interaction_log: None,
                annotation_log: None,
            }),
        }
    }

    /// Attaches JSON Lines logs. Must be called before the state is shared.
    pub fn with_logs(
        mut self,
        interactions: Option<JsonlWriter>,
        annotations: Option<JsonlWriter>,
    ) -> Self {
        let inner = Arc::get_mut(&mut self.inner).expect("logs attached before sharing state");
        inner.interaction_log = interactions;
        inner.annotation_log = annotations;
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.inner.corpus
    }

    pub fn session(&self, id: &str) -> Option<Session> {
        self.inner.sessions.lock().unwrap().get(id).cloned()
    }

    fn create_session(&self) -> Session {
        let session = Session {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            exchanges: Vec::new(),
        };
        self.inner
            .sessions
            .lock()
            .unwrap()
            .insert(session.session_id.clone(), session.clone());
        session
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/guidelines", get(guidelines))
        .route("/ask", post(ask))
        .route("/feedback", post(feedback))
        .route("/sessions", post(new_session))
        .route("/sessions/{id}", get(get_session))
        .route("/health", get(health))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::EmptyCorpus => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, message),
            PipelineError::Prompt(_) | PipelineError::UnknownTopicOverride(_) => {
                ApiError::new(StatusCode::BAD_REQUEST, message)
            }
            PipelineError::UnrecognizedTopic { raw } => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": message, "raw_response": raw }),
            },
            PipelineError::Backend { .. } | PipelineError::PipelineExhausted { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, message)
            }
        }
    }
}

/// Parses a JSON body by hand so that schema errors are 400s.
fn parse_body<T: serde::de::DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Serialize)]
struct GuidelineEntry<'a> {
    topic_id: &'a str,
    title: &'a str,
    line_count: usize,
}

async fn guidelines(State(state): State<AppState>) -> Result<Response, ApiError> {
    let corpus = state.corpus();
    if corpus.is_empty() {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no corpus loaded",
        ));
    }
    let entries: Vec<_> = corpus
        .iter()
        .map(|g| GuidelineEntry {
            topic_id: g.topic_id(),
            title: g.title(),
            line_count: g.len(),
        })
        .collect();
    Ok(Json(entries).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskRequest {
    question: String,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    topic_override: Option<String>,
    #[serde(default)]
    ensemble_size: Option<usize>,
}

#[derive(Serialize)]
struct AskResponse {
    session_id: String,
    question_id: String,
    answer: Answer,
    topic: String,
    selected_indices: LineSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    reasoning_trace: Option<String>,
    timings: StepTimings,
}

async fn ask(State(state): State<AppState>, body: String) -> Result<Response, ApiError> {
    let req: AskRequest = parse_body(&body)?;
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "question is empty"));
    }
    let ensemble = req
        .ensemble_size
        .unwrap_or(state.inner.options.ensemble_size);
    if !(1..=MAX_ENSEMBLE).contains(&ensemble) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("ensemble_size must be between 1 and {MAX_ENSEMBLE}"),
        ));
    }
    if state.corpus().is_empty() {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no corpus loaded",
        ));
    }
    if let Some(t) = &req.topic_override {
        if state.corpus().get(t).is_none() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("unknown topic override '{t}'"),
            ));
        }
    }
    if let Some(id) = &req.session_id {
        if state.session(id).is_none() {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                format!("unknown session '{id}'"),
            ));
        }
    }

    let mut options = state.inner.options.clone().with_ensemble(ensemble);
    options.topic_override = req.topic_override.clone();
    let worker = state.clone();
    let q = question.clone();
    let result = tokio::task::spawn_blocking(move || {
        let inner = &worker.inner;
        run_pipeline(&q, &inner.corpus, inner.backend.as_ref(), &options)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .inspect_err(|e| info!(error = %e, "ask failed"))?;

    let guideline = state
        .corpus()
        .get(&result.topic.topic_id)
        .expect("pipeline topic is in the corpus");
    let answer = assemble_answer(guideline, &result.consolidated, &question)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    let session_id = match req.session_id {
        Some(id) => id,
        None => state.create_session().session_id,
    };
    let timestamp = now();
    let question_id = {
        let mut sessions = state.inner.sessions.lock().unwrap();
        let session = sessions
            .get_mut(&session_id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "session vanished"))?;
        let question_id = format!("{session_id}-{}", session.exchanges.len() + 1);
        session.exchanges.push(Exchange {
            question_id: question_id.clone(),
            question: question.clone(),
            answer: answer.clone(),
            timings: result.timings.clone(),
            timestamp: timestamp.clone(),
        });
        question_id
    };

    if let Some(log) = &state.inner.interaction_log {
        let record = InteractionRecord {
            session_id: session_id.clone(),
            question_id: question_id.clone(),
            timestamp,
            question,
            topic_override: req.topic_override,
            ensemble_size: ensemble,
            max_retries_per_step: state.inner.options.max_retries_per_step,
            topic: result.topic.topic_id.clone(),
            selected_indices: result.consolidated.clone(),
            answer: answer.clone(),
            timings: result.timings.clone(),
            extraction: result.clone(),
        };
        if let Err(e) = log.append(&record) {
            error!(error = %e, "interaction log append failed");
        }
    }

    let response = AskResponse {
        session_id,
        question_id,
        topic: result.topic.topic_id.clone(),
        selected_indices: result.consolidated.clone(),
        reasoning_trace: result.reasoning_trace().map(str::to_string),
        timings: result.timings,
        answer,
    };
    Ok(Json(response).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRequest {
    #[serde(default)]
    session_id: Option<String>,
    question_id: String,
    #[serde(default)]
    task_kind: Option<TaskKind>,
    relevance: clearline_core::eval::Relevance,
    completeness: clearline_core::eval::Completeness,
    #[serde(default)]
    reasoning: Option<clearline_core::eval::Reasoning>,
}

async fn feedback(State(state): State<AppState>, body: String) -> Result<Response, ApiError> {
    let req: FeedbackRequest = parse_body(&body)?;
    if req.question_id.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "question_id is empty",
        ));
    }
    if let Some(id) = &req.session_id {
        if state.session(id).is_none() {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                format!("unknown session '{id}'"),
            ));
        }
    }
    let record = AnnotationRecord {
        question_id: req.question_id,
        task_kind: req.task_kind.unwrap_or(TaskKind::TopicBased),
        relevance: req.relevance,
        completeness: req.completeness,
        reasoning: req.reasoning,
        session_id: req.session_id,
    };
    if let Some(log) = &state.inner.annotation_log {
        log.append(&record)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    }
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn new_session(State(state): State<AppState>) -> Response {
    (StatusCode::CREATED, Json(state.create_session())).into_response()
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    state
        .session(&id)
        .map(|s| Json(s).into_response())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session '{id}'")))
}

async fn health(State(state): State<AppState>) -> Response {
    let corpus_loaded = !state.corpus().is_empty();
    let backend = state.inner.backend.clone();
    let backend_reachable = tokio::task::spawn_blocking(move || backend.probe(PROBE_TIMEOUT))
        .await
        .unwrap_or(false);
    let status = if corpus_loaded && backend_reachable {
        "ok"
    } else {
        "degraded"
    };
    Json(json!({
        "status": status,
        "corpus_loaded": corpus_loaded,
        "backend_reachable": backend_reachable,
    }))
    .into_response()
}
