//! Interaction log records and replay.

use clearline_core::answer::{assemble_answer, Answer, AnswerError};
use clearline_core::backend::ScriptedBackend;
use clearline_core::extraction::{ExtractionResult, LineSet, PipelineError, StepTimings};
use clearline_core::{run_pipeline, Corpus, Execution, PipelineOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One answered question, as appended to the interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub session_id: String,
    pub question_id: String,
    pub timestamp: String,
    pub question: String,
    pub topic_override: Option<String>,
    pub ensemble_size: usize,
    pub max_retries_per_step: usize,
    pub topic: String,
    pub selected_indices: LineSet,
    pub answer: Answer,
    pub timings: StepTimings,
    /// Everything the model returned, for audit and replay.
    pub extraction: ExtractionResult,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error("topic '{0}' is not in the corpus")]
    UnknownTopic(String),
}

impl InteractionRecord {
    /// Model responses in the order a sequential pipeline run consumes
    /// them: the topic reply, then for each ensemble run its rejected
    /// replies followed by its accepted one.
    pub fn replay_script(&self) -> Vec<String> {
        let ex = &self.extraction;
        let mut script = Vec::new();
        if !ex.topic.overridden {
            script.push(ex.topic.raw_response.clone());
        }
        let mut valid = ex.runs.iter();
        for run in 0..self.ensemble_size.max(1) {
            let rejected: Vec<_> = ex.rejected.iter().filter(|r| r.run == run).collect();
            script.extend(rejected.iter().map(|r| r.raw_response.clone()));
            if rejected.len() <= self.max_retries_per_step {
                if let Some(sel) = valid.next() {
                    script.push(sel.raw_response.clone());
                }
            }
        }
        script
    }

    /// Re-runs the pipeline against the logged model responses and
    /// rebuilds the answer.
    pub fn replay(
        &self,
        corpus: &Corpus,
        options: &PipelineOptions,
    ) -> Result<Answer, ReplayError> {
        let backend = ScriptedBackend::sequence(self.replay_script());
        let mut options = options
            .clone()
            .with_ensemble(self.ensemble_size)
            .with_retries(self.max_retries_per_step);
        options.topic_override = self.topic_override.clone();
        options.execution = Execution::Sequential;
        let result = run_pipeline(&self.question, corpus, &backend, &options)?;
        let g = corpus
            .get(&result.topic.topic_id)
            .ok_or_else(|| ReplayError::UnknownTopic(result.topic.topic_id.clone()))?;
        Ok(assemble_answer(g, &result.consolidated, &self.question)?)
    }
}
