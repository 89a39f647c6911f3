use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate_metrics, MetricRow, MetricSummary};
use super::EvalError;
use crate::backend::ChatBackend;
use crate::corpus::{canonical_topic, Corpus};
use crate::exec::Execution;
use crate::extraction::{run_pipeline, LineSet, PipelineOptions};
use crate::jsonl::{parse_jsonl, JsonlError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub question_id: String,
    #[serde(rename = "topic", alias = "topic_id")]
    pub topic_id: String,
    pub question: String,
    pub gold_indices: LineSet,
}

/// Parses gold records and checks them against the corpus. The stored
/// topic is normalized to the corpus spelling.
pub fn load_gold(text: &str, corpus: &Corpus) -> Result<Vec<GoldRecord>, JsonlError> {
    let mut records: Vec<GoldRecord> = parse_jsonl(text)?;
    let data_lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for (record, line) in records.iter_mut().zip(data_lines) {
        let fail = |reason: String| JsonlError::Record { line, reason };
        let g = corpus
            .get(&record.topic_id)
            .ok_or_else(|| fail(format!("unknown topic '{}'", record.topic_id)))?;
        if record.gold_indices.is_empty() {
            return Err(fail("gold_indices is empty".into()));
        }
        if let Some(bad) = record.gold_indices.iter().find(|&&i| i >= g.len()) {
            return Err(fail(format!(
                "gold index {bad} out of range for '{}' ({} lines)",
                g.topic_id(),
                g.len()
            )));
        }
        record.topic_id = g.topic_id().to_string();
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub topic: String,
    pub predicted_topic: Option<String>,
    pub selected: LineSet,
    pub gold: LineSet,
    pub metrics: MetricRow,
    /// Precision was defined as 0 because nothing was selected.
    pub empty_selection: bool,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl QuestionOutcome {
    fn failure(gold: &GoldRecord, predicted: Option<String>, reason: String) -> Self {
        Self {
            question_id: gold.question_id.clone(),
            topic: gold.topic_id.clone(),
            predicted_topic: predicted,
            selected: LineSet::new(),
            gold: gold.gold_indices.clone(),
            metrics: MetricRow::ZERO,
            empty_selection: true,
            failed: true,
            failure: Some(reason),
        }
    }
}

fn evaluate_one(
    gold: &GoldRecord,
    corpus: &Corpus,
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
) -> QuestionOutcome {
    let result = match run_pipeline(&gold.question, corpus, backend, options) {
        Ok(r) => r,
        Err(e) => return QuestionOutcome::failure(gold, None, e.to_string()),
    };
    let predicted = result.topic.topic_id;
    if canonical_topic(&predicted) != canonical_topic(&gold.topic_id) {
        let reason = format!("topic mismatch: predicted '{predicted}'");
        return QuestionOutcome::failure(gold, Some(predicted), reason);
    }
    QuestionOutcome {
        question_id: gold.question_id.clone(),
        topic: gold.topic_id.clone(),
        predicted_topic: Some(predicted),
        metrics: MetricRow::score(&result.consolidated, &gold.gold_indices),
        empty_selection: result.consolidated.is_empty(),
        selected: result.consolidated,
        gold: gold.gold_indices.clone(),
        failed: false,
        failure: None,
    }
}

/// Runs the pipeline for every gold question. Failures become zero rows
/// flagged `failed` instead of aborting the batch. Outcomes are returned in
/// gold order whatever the execution mode; order-sensitive backends force
/// sequential execution.
pub fn run_eval(
    corpus: &Corpus,
    gold: &[GoldRecord],
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
    execution: Execution,
) -> Vec<QuestionOutcome> {
    let execution = if backend.is_order_sensitive() {
        Execution::Sequential
    } else {
        execution
    };
    execution.map(gold.len(), |i| {
        evaluate_one(&gold[i], corpus, backend, options)
    })
}

/// Aggregates outcomes per topic, with topics in corpus order.
pub fn summarize_outcomes(
    outcomes: &[QuestionOutcome],
    corpus: &Corpus,
) -> Result<MetricSummary, EvalError> {
    let mut rows: IndexMap<String, Vec<MetricRow>> = corpus
        .topics()
        .iter()
        .map(|t| (t.clone(), Vec::new()))
        .collect();
    for o in outcomes {
        match rows.get_mut(&o.topic) {
            Some(v) => v.push(o.metrics),
            None => {
                return Err(EvalError::InvalidRecord {
                    record: o.question_id.clone(),
                    reason: format!("topic '{}' is not in the corpus", o.topic),
                })
            }
        }
    }
    rows.retain(|_, v| !v.is_empty());
    aggregate_metrics(&rows)
}
