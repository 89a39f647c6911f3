//! User-facing answers built only from verbatim guideline lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Guideline;
use crate::extraction::LineSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnswerError {
    #[error("line {index} is out of range for a guideline of {line_count} lines")]
    IndexOutOfRange { index: usize, line_count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub section: String,
    pub bodies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    #[serde(rename = "topic")]
    pub topic_id: String,
    pub question: String,
    pub segments: Vec<Segment>,
    pub empty: bool,
    pub footer: String,
}

impl Answer {
    /// Every body line in display order.
    pub fn bodies(&self) -> impl Iterator<Item = &str> {
        self.segments
            .iter()
            .flat_map(|s| s.bodies.iter().map(String::as_str))
    }

    /// True when every body is byte-identical to some line of `guideline`.
    pub fn is_grounded_in(&self, guideline: &Guideline) -> bool {
        self.bodies()
            .all(|b| guideline.lines().iter().any(|l| l.body == b))
    }
}

/// Fixed scaffolding around the selected lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerTemplate {
    pub preamble: String,
    pub empty_message: String,
    /// `{topic}` is replaced by the topic id.
    pub footer: String,
}

impl Default for AnswerTemplate {
    fn default() -> Self {
        Self {
            preamble: "Please follow the steps below:".into(),
            empty_message: "No relevant guideline lines were identified for this question.".into(),
            footer: "Please refer to {topic} guidelines for more information.".into(),
        }
    }
}

impl AnswerTemplate {
    pub fn footer_for(&self, topic_id: &str) -> String {
        self.footer.replace("{topic}", topic_id)
    }

    /// Groups the selected lines by section, in ascending index order.
    ///
    /// Selected lines share a segment when they belong to the same
    /// uninterrupted run of one section in the guideline; a line from another
    /// section in between starts a new segment with a repeated heading.
    pub fn assemble(
        &self,
        guideline: &Guideline,
        indices: &LineSet,
        question: &str,
    ) -> Result<Answer, AnswerError> {
        let lines = guideline.lines();
        let mut segments: Vec<Segment> = Vec::new();
        let mut previous: Option<usize> = None;
        for &index in indices {
            let line = guideline.line(index).ok_or(AnswerError::IndexOutOfRange {
                index,
                line_count: guideline.len(),
            })?;
            let same_run = previous
                .is_some_and(|p| lines[p..=index].iter().all(|l| l.section == line.section));
            match segments.last_mut() {
                Some(seg) if same_run => seg.bodies.push(line.body.clone()),
                _ => segments.push(Segment {
                    section: line.section.clone(),
                    bodies: vec![line.body.clone()],
                }),
            }
            previous = Some(index);
        }
        Ok(Answer {
            topic_id: guideline.topic_id().to_string(),
            question: question.to_string(),
            empty: segments.is_empty(),
            segments,
            footer: self.footer_for(guideline.topic_id()),
        })
    }

    pub fn render(&self, answer: &Answer) -> String {
        if answer.empty {
            return format!("{}\n\n{}", self.empty_message, answer.footer);
        }
        let mut out = format!("{}\n\n", self.preamble);
        for seg in &answer.segments {
            out.push_str(&seg.section);
            out.push('\n');
            for body in &seg.bodies {
                out.push_str(body);
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str(&answer.footer);
        out
    }
}

pub fn assemble_answer(
    guideline: &Guideline,
    indices: &LineSet,
    question: &str,
) -> Result<Answer, AnswerError> {
    AnswerTemplate::default().assemble(guideline, indices, question)
}

pub fn render_text(answer: &Answer) -> String {
    AnswerTemplate::default().render(answer)
}
