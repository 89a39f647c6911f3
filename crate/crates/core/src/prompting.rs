//! Few-shot chat prompts for the two extraction steps.
//!
//! Both steps use plain user/assistant turns with no system message. Each
//! few-shot pair is one user turn followed by the expected assistant turn,
//! and the bundle ends with the real query as a final user turn.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_guideline_source, render_numbered_context};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("topic list is empty")]
    EmptyTopicList,
    #[error("numbered context is empty")]
    EmptyContext,
    #[error("question is empty")]
    EmptyQuestion,
    #[error("few-shot example {index} for {step:?}: {reason}")]
    InvalidShot {
        step: Step,
        index: usize,
        reason: String,
    },
    #[error("invalid few-shot file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    TopicIdentification,
    LineIdentification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub user_content: String,
    pub assistant_content: String,
}

impl FewShotExample {
    /// Checks the assistant turn against the step's output contract.
    fn validate(&self, step: Step) -> Result<(), String> {
        if self.user_content.trim().is_empty() {
            return Err("empty user content".into());
        }
        let answer = self.assistant_content.trim();
        if answer.is_empty() {
            return Err("empty assistant content".into());
        }
        match step {
            Step::TopicIdentification if answer.contains('\n') => {
                Err("topic answer must be a single topic name".into())
            }
            Step::LineIdentification
                if !answer
                    .split_whitespace()
                    .all(|t| t.bytes().all(|b| b.is_ascii_digit())) =>
            {
                Err("line answer must be whitespace-separated integers".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub step: Step,
    pub messages: Vec<ChatMessage>,
}

impl PromptBundle {
    pub fn final_user_message(&self) -> &str {
        &self
            .messages
            .last()
            .expect("bundle always ends with the query")
            .content
    }
}

pub fn topic_query(question: &str, topics: &[String]) -> String {
    format!(
        "Identify the topic of the following question:\n{question}\nUse the following topic list:\n{}.\nDo not include any other text. Provide only the topic name.",
        topics.join(", ")
    )
}

pub fn line_query(question: &str, numbered_context: &str) -> String {
    format!(
        "Your question is:\n{question}\nIdentify the minimum relevant lines from the context below that help answer the question.\nDo not include any other text. Provide the line numbers that answer the question, separated by white space.\nThe content of the sections is below:\n{numbered_context}"
    )
}

fn assemble(step: Step, shots: &[FewShotExample], query: String) -> PromptBundle {
    let mut messages = Vec::with_capacity(shots.len() * 2 + 1);
    for shot in shots {
        messages.push(ChatMessage::user(shot.user_content.clone()));
        messages.push(ChatMessage::assistant(shot.assistant_content.clone()));
    }
    messages.push(ChatMessage::user(query));
    PromptBundle { step, messages }
}

pub fn build_topic_prompt(
    question: &str,
    topics: &[String],
    shots: &[FewShotExample],
) -> Result<PromptBundle, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if topics.is_empty() {
        return Err(PromptError::EmptyTopicList);
    }
    Ok(assemble(
        Step::TopicIdentification,
        shots,
        topic_query(question, topics),
    ))
}

pub fn build_line_prompt(
    question: &str,
    numbered_context: &str,
    shots: &[FewShotExample],
) -> Result<PromptBundle, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    if numbered_context.trim().is_empty() {
        return Err(PromptError::EmptyContext);
    }
    Ok(assemble(
        Step::LineIdentification,
        shots,
        line_query(question, numbered_context),
    ))
}

/// Few-shot exemplars for both steps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShotStore {
    pub topic: Vec<FewShotExample>,
    pub line: Vec<FewShotExample>,
}

#[derive(Serialize, Deserialize)]
struct ShotRecord {
    step: Step,
    user: String,
    assistant: String,
}

impl ShotStore {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn for_step(&self, step: Step) -> &[FewShotExample] {
        match step {
            Step::TopicIdentification => &self.topic,
            Step::LineIdentification => &self.line,
        }
    }

    /// Keeps at most `k` pairs per step.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            topic: self.topic.iter().take(k).cloned().collect(),
            line: self.line.iter().take(k).cloned().collect(),
        }
    }

    /// Parses `[{"step": ..., "user": ..., "assistant": ...}]`.
    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        let records: Vec<ShotRecord> =
            serde_json::from_str(text).map_err(|e| PromptError::File(e.to_string()))?;
        let mut store = Self::default();
        for record in records {
            let shot = FewShotExample {
                user_content: record.user,
                assistant_content: record.assistant,
            };
            let bucket = match record.step {
                Step::TopicIdentification => &mut store.topic,
                Step::LineIdentification => &mut store.line,
            };
            shot.validate(record.step)
                .map_err(|reason| PromptError::InvalidShot {
                    step: record.step,
                    index: bucket.len(),
                    reason,
                })?;
            bucket.push(shot);
        }
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<ShotRecord> = [Step::TopicIdentification, Step::LineIdentification]
            .into_iter()
            .flat_map(|step| {
                self.for_step(step).iter().map(move |s| ShotRecord {
                    step,
                    user: s.user_content.clone(),
                    assistant: s.assistant_content.clone(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("shots serialize")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Two synthetic pairs per step, built from a small bundled toy guideline.
    /// These are placeholders and do not describe any real guideline.
    pub fn bundled() -> Self {
        let toy = parse_guideline_source(TOY_GUIDELINE, "Anaemia", "Anaemia")
            .expect("bundled toy guideline parses");
        let context = render_numbered_context(&toy);
        let topics: Vec<String> = TOY_TOPICS.iter().map(|s| s.to_string()).collect();
        let topic = vec![
            FewShotExample {
                user_content: topic_query("What is the starting dose of oral iron?", &topics),
                assistant_content: "Anaemia".into(),
            },
            FewShotExample {
                user_content: topic_query("Which inhaler should be used first?", &topics),
                assistant_content: "Asthma".into(),
            },
        ];
        let line = vec![
            FewShotExample {
                user_content: line_query("Which blood tests should I request?", &context),
                assistant_content: "2 3".into(),
            },
            FewShotExample {
                user_content: line_query("When is a transfusion indicated?", &context),
                assistant_content: "5".into(),
            },
        ];
        Self { topic, line }
    }
}

const TOY_TOPICS: [&str; 3] = ["Asthma", "Anaemia", "Migraine"];

const TOY_GUIDELINE: &str = "\
# DEFINITIONS
Anaemia is a haemoglobin concentration below the reference range for age and sex.
Iron deficiency is the most common cause of microcytic anaemia.
# INVESTIGATIONS
Request a full blood count and blood film.
Request ferritin, B12 and folate.
# TREATMENT
Start oral ferrous sulfate 200 mg once daily.
Consider transfusion if haemoglobin is below 70 g/L or the patient is symptomatic.
";

#[cfg(test)]
mod tests {
    use super::*;

    fn topics(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn topic_prompt_matches_template() {
        let b = build_topic_prompt(
            "How do I define hypertensive emergency?",
            &topics(&["Hypertension", "Diabetes", "Heart Disease"]),
            &[],
        )
        .unwrap();
        assert_eq!(b.step, Step::TopicIdentification);
        assert_eq!(
            b.final_user_message(),
            "Identify the topic of the following question:\nHow do I define hypertensive emergency?\nUse the following topic list:\nHypertension, Diabetes, Heart Disease.\nDo not include any other text. Provide only the topic name."
        );
    }

    #[test]
    fn single_topic_list_still_uses_template() {
        let b = build_topic_prompt("q?", &topics(&["DKA"]), &[]).unwrap();
        assert!(b
            .final_user_message()
            .contains("Use the following topic list:\nDKA.\n"));
    }

    #[test]
    fn two_shots_give_five_messages() {
        let shots = ShotStore::bundled();
        let b = build_topic_prompt("q?", &topics(&["A"]), &shots.topic).unwrap();
        assert_eq!(b.messages.len(), 2 * 2 + 1);
        let roles: Vec<_> = b.messages.iter().map(|m| m.role).collect();
        assert_eq!(
            roles,
            [
                Role::User,
                Role::Assistant,
                Role::User,
                Role::Assistant,
                Role::User
            ]
        );
    }

    #[test]
    fn zero_shot_line_prompt_has_one_message() {
        let b = build_line_prompt("q?", "0: S: x", &[]).unwrap();
        assert_eq!(b.messages.len(), 1);
        assert!(b.final_user_message().ends_with("below:\n0: S: x"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert_eq!(
            build_topic_prompt("q", &[], &[]).unwrap_err(),
            PromptError::EmptyTopicList
        );
        assert_eq!(
            build_line_prompt("q", "  ", &[]).unwrap_err(),
            PromptError::EmptyContext
        );
        assert_eq!(
            build_line_prompt("", "0: S: x", &[]).unwrap_err(),
            PromptError::EmptyQuestion
        );
    }

    #[test]
    fn bundled_shots_obey_contracts() {
        let store = ShotStore::bundled();
        assert_eq!((store.topic.len(), store.line.len()), (2, 2));
        for s in &store.topic {
            s.validate(Step::TopicIdentification).unwrap();
        }
        for s in &store.line {
            s.validate(Step::LineIdentification).unwrap();
        }
    }

    #[test]
    fn shot_file_round_trips() {
        let store = ShotStore::bundled();
        assert_eq!(ShotStore::from_json(&store.to_json()).unwrap(), store);
    }

    #[test]
    fn shot_file_rejects_free_text_line_answer() {
        let text = r#"[{"step":"line_identification","user":"u","assistant":"lines 1 and 2"}]"#;
        assert!(matches!(
            ShotStore::from_json(text),
            Err(PromptError::InvalidShot { index: 0, .. })
        ));
        let text = r#"[{"step":"summarise","user":"u","assistant":"1"}]"#;
        assert!(matches!(
            ShotStore::from_json(text),
            Err(PromptError::File(_))
        ));
    }

    #[test]
    fn truncation_limits_pairs() {
        let store = ShotStore::bundled().truncated(1);
        assert_eq!((store.topic.len(), store.line.len()), (1, 1));
    }
}
