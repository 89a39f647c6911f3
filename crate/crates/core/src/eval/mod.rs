//! Evaluation: overlap metrics against gold line sets, timing aggregation,
//! annotation tallies and report rendering.

mod annotations;
mod metrics;
mod report;
mod runner;
mod timing;

use thiserror::Error;

pub use annotations::{
    tally_annotations, AnnotationRecord, CategoryTally, Completeness, GroupTally, Reasoning,
    Relevance, Share, Tallies, TaskKind,
};
pub use metrics::{aggregate_metrics, f_score, precision, recall, MetricRow, MetricSummary};
pub use report::{emit_report, EvalReport, ReportFormat};
pub use runner::{load_gold, run_eval, summarize_outcomes, GoldRecord, QuestionOutcome};
pub use timing::{aggregate_timing, TimingMode, TimingRecord, TimingSummary, TopicTiming};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("topic '{0}' has no question rows")]
    NoRows(String),
    #[error("no records to aggregate")]
    NoRecords,
    #[error("no response count for topic '{0}'")]
    MissingCount(String),
    #[error("response counts sum to zero")]
    ZeroWeight,
    #[error("record {record}: {reason}")]
    InvalidRecord { record: String, reason: String },
}

/// Rounds half away from zero to `decimals` places.
pub fn round_half_away(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(6.25, 1), 6.3);
        assert_eq!(round_half_away(43.75, 1), 43.8);
        assert_eq!(round_half_away(-0.125, 2), -0.13);
        assert_eq!(round_half_away(0.9189, 2), 0.92);
    }
}
