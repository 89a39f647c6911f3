use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub question_id: String,
    #[serde(alias = "topic")]
    pub topic_id: String,
    pub human_seconds: f64,
    pub chatbot_seconds: f64,
}

impl TimingRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if positive(self.human_seconds) && positive(self.chatbot_seconds) {
            Ok(())
        } else {
            Err(EvalError::InvalidRecord {
                record: self.question_id.clone(),
                reason: "durations must be positive".into(),
            })
        }
    }
}

/// How the overall total is formed from per-topic means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Plain mean of the topic means.
    UnweightedTopicMean,
    /// Topic means weighted by per-topic response counts.
    ResponseWeightedMean,
}

impl TimingMode {
    pub fn label(self) -> &'static str {
        match self {
            TimingMode::UnweightedTopicMean => "unweighted topic mean",
            TimingMode::ResponseWeightedMean => "response-weighted mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTiming {
    pub records: usize,
    pub human_mean: f64,
    pub chatbot_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mode: TimingMode,
    /// In order of first appearance in the records.
    pub per_topic: IndexMap<String, TopicTiming>,
    pub total_human: f64,
    pub total_chatbot: f64,
}

pub fn aggregate_timing(
    records: &[TimingRecord],
    counts: &HashMap<String, usize>,
    mode: TimingMode,
) -> Result<TimingSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let mut sums: IndexMap<&str, (usize, f64, f64)> = IndexMap::new();
    for r in records {
        r.validate()?;
        let entry = sums.entry(&r.topic_id).or_default();
        entry.0 += 1;
        entry.1 += r.human_seconds;
        entry.2 += r.chatbot_seconds;
    }
    let per_topic: IndexMap<String, TopicTiming> = sums
        .into_iter()
        .map(|(topic, (n, human, bot))| {
            (
                topic.to_string(),
                TopicTiming {
                    records: n,
                    human_mean: human / n as f64,
                    chatbot_mean: bot / n as f64,
                },
            )
        })
        .collect();

    let weights: Vec<f64> = match mode {
        TimingMode::UnweightedTopicMean => vec![1.0; per_topic.len()],
        TimingMode::ResponseWeightedMean => per_topic
            .keys()
            .map(|t| {
                counts
                    .get(t)
                    .map(|&c| c as f64)
                    .ok_or_else(|| EvalError::MissingCount(t.clone()))
            })
            .collect::<Result<_, _>>()?,
    };
    let total_weight: f64 = weights.iter().sum();
    if total_weight == 0.0 {
        return Err(EvalError::ZeroWeight);
    }
    let weighted = |pick: fn(&TopicTiming) -> f64| {
        per_topic
            .values()
            .zip(&weights)
            .map(|(t, w)| pick(t) * w)
            .sum::<f64>()
            / total_weight
    };
    Ok(TimingSummary {
        mode,
        total_human: weighted(|t| t.human_mean),
        total_chatbot: weighted(|t| t.chatbot_mean),
        per_topic,
    })
}
