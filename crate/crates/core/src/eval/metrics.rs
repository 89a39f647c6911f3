use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::extraction::LineSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl MetricRow {
    pub const ZERO: MetricRow = MetricRow {
        precision: 0.0,
        recall: 0.0,
        f_score: 0.0,
    };

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f_score: f_score(precision, recall),
        }
    }

    pub fn score(selected: &LineSet, gold: &LineSet) -> Self {
        Self::from_pr(precision(selected, gold), recall(selected, gold))
    }
}

/// |selected ∩ gold| / |selected|; an empty selection scores 0.
pub fn precision(selected: &LineSet, gold: &LineSet) -> f64 {
    if selected.is_empty() {
        return 0.0;
    }
    selected.intersection(gold).count() as f64 / selected.len() as f64
}

/// |selected ∩ gold| / |gold|. Gold sets are non-empty by construction;
/// an empty one scores 0.
pub fn recall(selected: &LineSet, gold: &LineSet) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    selected.intersection(gold).count() as f64 / gold.len() as f64
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_topic: IndexMap<String, MetricRow>,
    pub average: MetricRow,
}

fn mean_row<'a>(rows: impl ExactSizeIterator<Item = &'a MetricRow>) -> MetricRow {
    let n = rows.len() as f64;
    let (p, r, f) = rows.fold((0.0, 0.0, 0.0), |(p, r, f), row| {
        (p + row.precision, r + row.recall, f + row.f_score)
    });
    MetricRow {
        precision: p / n,
        recall: r / n,
        f_score: f / n,
    }
}

/// Per-topic means over questions, then the unweighted mean over topics.
/// F is averaged like P and R, never recomputed from the averages.
pub fn aggregate_metrics(
    rows: &IndexMap<String, Vec<MetricRow>>,
) -> Result<MetricSummary, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let mut per_topic = IndexMap::with_capacity(rows.len());
    for (topic, questions) in rows {
        if questions.is_empty() {
            return Err(EvalError::NoRows(topic.clone()));
        }
        per_topic.insert(topic.clone(), mean_row(questions.iter()));
    }
    let average = mean_row(per_topic.values());
    Ok(MetricSummary { per_topic, average })
}
