use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::annotations::{CategoryTally, Tallies};
use super::metrics::{MetricRow, MetricSummary};
use super::runner::QuestionOutcome;
use super::timing::TimingSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Everything the evaluation commands produce. Sections that were not
/// computed are empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_topic: IndexMap<String, MetricRow>,
    pub average: Option<MetricRow>,
    pub questions: Vec<QuestionOutcome>,
    pub timing: Vec<TimingSummary>,
    pub tallies: Tallies,
}

impl EvalReport {
    pub fn with_metrics(mut self, summary: MetricSummary, questions: Vec<QuestionOutcome>) -> Self {
        self.per_topic = summary.per_topic;
        self.average = Some(summary.average);
        self.questions = questions;
        self
    }

    pub fn with_timing(mut self, timing: Vec<TimingSummary>) -> Self {
        self.timing = timing;
        self
    }

    pub fn with_tallies(mut self, tallies: Tallies) -> Self {
        self.tallies = tallies;
        self
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(report),
    }
}

fn markdown(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n");
    if let Some(avg) = &report.average {
        out.push_str("\n## Automatic evaluation\n\n");
        out.push_str("| Topic | Precision | Recall | F-score |\n| --- | --- | --- | --- |\n");
        for (topic, row) in &report.per_topic {
            metric_line(&mut out, topic, row);
        }
        metric_line(&mut out, "Average", avg);
        let failed: Vec<_> = report.questions.iter().filter(|q| q.failed).collect();
        let _ = writeln!(
            out,
            "\n{} questions evaluated, {} failed.",
            report.questions.len(),
            failed.len()
        );
        for q in failed {
            let _ = writeln!(
                out,
                "- {} ({}): {}",
                q.question_id,
                q.topic,
                q.failure.as_deref().unwrap_or("failed")
            );
        }
    }
    if let Some(first) = report.timing.first() {
        out.push_str("\n## Response times (seconds)\n\n");
        out.push_str("| Guideline | Participant mean | Chatbot mean |\n| --- | --- | --- |\n");
        for (topic, t) in &first.per_topic {
            let _ = writeln!(
                out,
                "| {topic} | {:.2} | {:.2} |",
                t.human_mean, t.chatbot_mean
            );
        }
        for summary in &report.timing {
            let _ = writeln!(
                out,
                "| Total ({}) | {:.2} | {:.2} |",
                summary.mode.label(),
                summary.total_human,
                summary.total_chatbot
            );
        }
    }
    if !report.tallies.is_empty() {
        out.push_str("\n## Annotation tallies\n");
        for (group, tally) in &report.tallies {
            let _ = writeln!(out, "\n### {group} ({} records)\n", tally.records);
            out.push_str("| Criterion | Category | Count | Percent |\n| --- | --- | --- | --- |\n");
            tally_lines(&mut out, "relevance", &tally.relevance);
            tally_lines(&mut out, "completeness", &tally.completeness);
            if let Some(r) = &tally.reasoning {
                tally_lines(&mut out, "reasoning", r);
            }
        }
    }
    out
}

fn metric_line(out: &mut String, label: &str, row: &MetricRow) {
    let _ = writeln!(
        out,
        "| {label} | {:.2} | {:.2} | {:.2} |",
        super::round_half_away(row.precision, 2),
        super::round_half_away(row.recall, 2),
        super::round_half_away(row.f_score, 2)
    );
}

fn tally_lines(out: &mut String, criterion: &str, tally: &CategoryTally) {
    for (category, share) in &tally.shares {
        let _ = writeln!(
            out,
            "| {criterion} | {category} | {} | {:.1} |",
            share.count, share.percent
        );
    }
}
