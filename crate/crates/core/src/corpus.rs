//! Line-indexed guideline documents.
//!
//! A guideline is ingested from cleaned plain text where `# ` lines declare
//! the current section and every other non-blank line is one selectable
//! statement. Statements are numbered from 0 in document order and carry
//! their section, so the numbered context handed to the model reads
//! `"{index}: {section}: {body}"`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const HEADER_PREFIX: &str = "# ";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: content appears before any section header")]
    MissingSectionHeader { line: usize },
    #[error("line {line}: section header has no text")]
    EmptySectionHeader { line: usize },
    #[error("document contains no content lines")]
    EmptyDocument,
    #[error("corpus contains no guidelines")]
    EmptyCorpus,
    #[error("duplicate topic '{0}'")]
    DuplicateTopic(String),
    #[error("topic list and guideline map disagree on '{0}'")]
    TopicMismatch(String),
    #[error("guideline '{topic}': line {position} has index {found}")]
    NonContiguousIndex {
        topic: String,
        position: usize,
        found: usize,
    },
    #[error("guideline '{topic}': line {index} has an empty section or body")]
    EmptyField { topic: String, index: usize },
    #[error("invalid corpus JSON: {0}")]
    Json(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// One selectable guideline statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineLine {
    pub index: usize,
    pub section: String,
    pub body: String,
}

/// An immutable, line-indexed guideline. Indices are always `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guideline {
    topic_id: String,
    title: String,
    lines: Vec<GuidelineLine>,
}

impl Guideline {
    /// Builds a guideline from already-indexed lines, checking every invariant.
    pub fn from_lines(
        topic_id: impl Into<String>,
        title: impl Into<String>,
        lines: Vec<GuidelineLine>,
    ) -> Result<Self, CorpusError> {
        let topic_id = topic_id.into();
        if lines.is_empty() {
            return Err(CorpusError::EmptyDocument);
        }
        for (position, line) in lines.iter().enumerate() {
            if line.index != position {
                return Err(CorpusError::NonContiguousIndex {
                    topic: topic_id,
                    position,
                    found: line.index,
                });
            }
            if line.section.trim().is_empty() || line.body.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    topic: topic_id,
                    index: line.index,
                });
            }
        }
        Ok(Self {
            topic_id,
            title: title.into(),
            lines,
        })
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn lines(&self) -> &[GuidelineLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    /// Always false; a guideline holds at least one line.
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn line(&self, index: usize) -> Option<&GuidelineLine> {
        self.lines.get(index)
    }

    pub fn word_count(&self) -> usize {
        self.lines
            .iter()
            .map(|l| l.body.split_whitespace().count())
            .sum()
    }
}

/// Parses the guideline source format into a [`Guideline`].
///
/// Header lines and blank lines are never indexed. Bodies are the content
/// lines with surrounding whitespace trimmed, so each body is a verbatim
/// substring of `source`. Error line numbers are 1-based.
pub fn parse_guideline_source(
    source: &str,
    topic_id: &str,
    title: &str,
) -> Result<Guideline, CorpusError> {
    let mut section: Option<&str> = None;
    let mut lines = Vec::new();
    for (line_no, raw) in source.lines().enumerate() {
        let line_no = line_no + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(heading) = raw.strip_prefix(HEADER_PREFIX) {
            let heading = heading.trim();
            if heading.is_empty() {
                return Err(CorpusError::EmptySectionHeader { line: line_no });
            }
            section = Some(heading);
            continue;
        }
        if raw.trim_end() == "#" {
            return Err(CorpusError::EmptySectionHeader { line: line_no });
        }
        let Some(current) = section else {
            return Err(CorpusError::MissingSectionHeader { line: line_no });
        };
        lines.push(GuidelineLine {
            index: lines.len(),
            section: current.to_string(),
            body: raw.trim().to_string(),
        });
    }
    if lines.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    Ok(Guideline {
        topic_id: topic_id.to_string(),
        title: title.to_string(),
        lines,
    })
}

/// Renders the numbered, section-prefixed listing used as model context.
pub fn render_numbered_context(guideline: &Guideline) -> String {
    let mut out = String::new();
    for (i, line) in guideline.lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{}: {}: {}", line.index, line.section, line.body);
    }
    out
}

/// Canonical form used for topic comparison: trimmed and case-folded.
pub fn canonical_topic(topic: &str) -> String {
    topic.trim().to_lowercase()
}

/// An ordered, immutable set of guidelines keyed by topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    topics: Vec<String>,
    guidelines: HashMap<String, Guideline>,
    by_canonical: HashMap<String, String>,
}

impl Corpus {
    /// Builds a corpus; topic order follows the input order.
    pub fn new(guidelines: Vec<Guideline>) -> Result<Self, CorpusError> {
        let mut topics = Vec::with_capacity(guidelines.len());
        let mut by_canonical = HashMap::new();
        let mut map = HashMap::new();
        for g in guidelines {
            let canonical = canonical_topic(&g.topic_id);
            if by_canonical.contains_key(&canonical) {
                return Err(CorpusError::DuplicateTopic(g.topic_id));
            }
            by_canonical.insert(canonical, g.topic_id.clone());
            topics.push(g.topic_id.clone());
            map.insert(g.topic_id.clone(), g);
        }
        Ok(Self {
            topics,
            guidelines: map,
            by_canonical,
        })
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    /// Looks a guideline up by topic under canonical comparison.
    pub fn get(&self, topic: &str) -> Option<&Guideline> {
        self.by_canonical
            .get(&canonical_topic(topic))
            .and_then(|id| self.guidelines.get(id))
    }

    /// Guidelines in topic order.
    pub fn iter(&self) -> impl Iterator<Item = &Guideline> {
        self.topics.iter().map(move |t| &self.guidelines[t])
    }

    pub fn to_json(&self) -> String {
        let file = CorpusFile {
            topics: self.topics.clone(),
            guidelines: self
                .iter()
                .map(|g| {
                    (
                        g.topic_id.clone(),
                        GuidelineEntry {
                            title: g.title.clone(),
                            lines: g.lines.clone(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("corpus serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: CorpusFile =
            serde_json::from_str(text).map_err(|e| CorpusError::Json(e.to_string()))?;
        let CorpusFile {
            topics,
            mut guidelines,
        } = file;
        if topics.len() != guidelines.len() {
            let stray = guidelines
                .keys()
                .find(|k| !topics.contains(k))
                .cloned()
                .unwrap_or_default();
            return Err(CorpusError::TopicMismatch(stray));
        }
        let mut out = Vec::with_capacity(topics.len());
        for topic in topics {
            let entry = guidelines
                .swap_remove(&topic)
                .ok_or_else(|| CorpusError::TopicMismatch(topic.clone()))?;
            out.push(Guideline::from_lines(topic, entry.title, entry.lines)?);
        }
        Self::new(out)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    topics: Vec<String>,
    guidelines: IndexMap<String, GuidelineEntry>,
}

#[derive(Serialize, Deserialize)]
struct GuidelineEntry {
    title: String,
    lines: Vec<GuidelineLine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineSize {
    pub lines: usize,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub line_count_mean: f64,
    pub word_count_mean: f64,
    pub per_guideline: IndexMap<String, GuidelineSize>,
}

/// Per-guideline line and word counts plus their means over guidelines.
pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let per_guideline: IndexMap<_, _> = corpus
        .iter()
        .map(|g| {
            (
                g.topic_id.clone(),
                GuidelineSize {
                    lines: g.len(),
                    words: g.word_count(),
                },
            )
        })
        .collect();
    let n = per_guideline.len() as f64;
    let line_count_mean = per_guideline.values().map(|s| s.lines as f64).sum::<f64>() / n;
    let word_count_mean = per_guideline.values().map(|s| s.words as f64).sum::<f64>() / n;
    Ok(CorpusStats {
        line_count_mean,
        word_count_mean,
        per_guideline,
    })
}
