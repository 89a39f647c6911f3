use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{round_half_away, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    TopicBased,
    ScenarioBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    VeryRelevant,
    Relevant,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completeness {
    #[serde(alias = "just_right")]
    Satisfactory,
    MinorOmission,
    MajorOmission,
    MinorAddition,
    MajorAddition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reasoning {
    VeryGood,
    MinorFlaw,
    MajorFlaw,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::TopicBased, TaskKind::ScenarioBased];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::TopicBased => "topic_based",
            TaskKind::ScenarioBased => "scenario_based",
        }
    }
}

impl Relevance {
    pub const ALL: [Relevance; 3] = [
        Relevance::VeryRelevant,
        Relevance::Relevant,
        Relevance::Irrelevant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relevance::VeryRelevant => "very_relevant",
            Relevance::Relevant => "relevant",
            Relevance::Irrelevant => "irrelevant",
        }
    }
}

impl Completeness {
    pub const ALL: [Completeness; 5] = [
        Completeness::Satisfactory,
        Completeness::MinorOmission,
        Completeness::MajorOmission,
        Completeness::MinorAddition,
        Completeness::MajorAddition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Completeness::Satisfactory => "satisfactory",
            Completeness::MinorOmission => "minor_omission",
            Completeness::MajorOmission => "major_omission",
            Completeness::MinorAddition => "minor_addition",
            Completeness::MajorAddition => "major_addition",
        }
    }
}

impl Reasoning {
    pub const ALL: [Reasoning; 3] = [
        Reasoning::VeryGood,
        Reasoning::MinorFlaw,
        Reasoning::MajorFlaw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Reasoning::VeryGood => "very_good",
            Reasoning::MinorFlaw => "minor_flaw",
            Reasoning::MajorFlaw => "major_flaw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub question_id: String,
    pub task_kind: TaskKind,
    pub relevance: Relevance,
    pub completeness: Completeness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<Reasoning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    /// `100 * count / total`, rounded to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub total: usize,
    pub shares: IndexMap<String, Share>,
}

impl CategoryTally {
    fn build<'a>(categories: impl IntoIterator<Item = &'a str>, values: &[&'a str]) -> Self {
        let total = values.len();
        let shares = categories
            .into_iter()
            .map(|cat| {
                let count = values.iter().filter(|v| **v == cat).count();
                let percent = round_half_away(100.0 * count as f64 / total as f64, 1);
                (cat.to_string(), Share { count, percent })
            })
            .collect();
        Self { total, shares }
    }

    /// Unrounded percentage for `category`.
    pub fn raw_percent(&self, category: &str) -> Option<f64> {
        self.shares
            .get(category)
            .map(|s| 100.0 * s.count as f64 / self.total as f64)
    }

    pub fn percent(&self, category: &str) -> Option<f64> {
        self.shares.get(category).map(|s| s.percent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTally {
    pub records: usize,
    pub relevance: CategoryTally,
    pub completeness: CategoryTally,
    /// Over the records that carry a reasoning rating; absent when none do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<CategoryTally>,
}

/// Keyed by `topic_based`, `scenario_based` and `combined`; groups with no
/// records are left out.
pub type Tallies = IndexMap<String, GroupTally>;

fn group_tally(records: &[&AnnotationRecord]) -> GroupTally {
    let relevance: Vec<&str> = records.iter().map(|r| r.relevance.as_str()).collect();
    let completeness: Vec<&str> = records.iter().map(|r| r.completeness.as_str()).collect();
    let reasoning: Vec<&str> = records
        .iter()
        .filter_map(|r| r.reasoning.map(Reasoning::as_str))
        .collect();
    GroupTally {
        records: records.len(),
        relevance: CategoryTally::build(Relevance::ALL.map(Relevance::as_str), &relevance),
        completeness: CategoryTally::build(
            Completeness::ALL.map(Completeness::as_str),
            &completeness,
        ),
        reasoning: (!reasoning.is_empty())
            .then(|| CategoryTally::build(Reasoning::ALL.map(Reasoning::as_str), &reasoning)),
    }
}

/// Category percentages per task kind and over all records.
pub fn tally_annotations(records: &[AnnotationRecord]) -> Result<Tallies, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let mut tallies = Tallies::new();
    for kind in TaskKind::ALL {
        let group: Vec<&AnnotationRecord> =
            records.iter().filter(|r| r.task_kind == kind).collect();
        if !group.is_empty() {
            tallies.insert(kind.as_str().to_string(), group_tally(&group));
        }
    }
    let all: Vec<&AnnotationRecord> = records.iter().collect();
    tallies.insert("combined".into(), group_tally(&all));
    Ok(tallies)
}
