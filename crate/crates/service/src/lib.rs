//! HTTP JSON API over the extraction pipeline.
//!
//! Endpoints: `GET /guidelines`, `POST /ask`, `POST /feedback`,
//! `POST /sessions`, `GET /sessions/{id}` and `GET /health`. Sessions live
//! in memory; answered questions and feedback are appended to JSON Lines
//! logs.

mod app;
pub mod config;
pub mod log;

use std::sync::Arc;

use clearline_core::backend::{HttpBackend, ScriptedBackend};
use clearline_core::jsonl::JsonlWriter;
use clearline_core::prompting::ShotStore;
use clearline_core::{ChatBackend, Corpus, PipelineOptions};
use thiserror::Error;
use tracing::info;

pub use app::{router, AppState, Exchange, Session};
pub use config::{ConfigError, ServiceConfig};
pub use log::{InteractionRecord, ReplayError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] clearline_core::corpus::CorpusError),
    #[error("few-shot file: {0}")]
    Shots(#[from] clearline_core::prompting::PromptError),
    #[error("script: {0}")]
    Script(#[from] clearline_core::backend::ScriptError),
    #[error("backend: {0}")]
    Backend(#[from] clearline_core::backend::BackendError),
    #[error("log: {0}")]
    Log(#[from] clearline_core::jsonl::JsonlError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Builds the service state described by `config`: corpus, backend,
/// pipeline options and log writers.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServeError> {
    config.validate()?;
    let corpus = Corpus::load(&config.corpus_path)?;
    let backend: Arc<dyn ChatBackend> = match &config.script_path {
        Some(path) => Arc::new(ScriptedBackend::load(path)?),
        None => Arc::new(HttpBackend::new(config.backend_config())?),
    };
    let shots = match &config.shots_path {
        Some(path) => ShotStore::load(path)?,
        None => ShotStore::bundled(),
    };
    let options = PipelineOptions::default()
        .with_ensemble(config.ensemble_size)
        .with_retries(config.max_retries_per_step)
        .with_shots(shots);
    Ok(AppState::new(corpus, backend, options).with_logs(
        Some(JsonlWriter::open(&config.log_path)?),
        Some(JsonlWriter::open(&config.annotation_log_path)?),
    ))
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.bind_address).await?;
    info!(address = %listener.local_addr()?, topics = state.corpus().len(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
