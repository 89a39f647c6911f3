//! Bundled sample corpora.
//!
//! The guideline texts are synthetic examples written for testing and
//! demonstration. They are not clinical guidance.

use crate::corpus::{parse_guideline_source, Corpus};

/// `(topic_id, title, source)` for the six-topic sample corpus.
pub const SAMPLE_GUIDELINES: [(&str, &str, &str); 6] = [
    (
        "Hot Swollen Joint",
        "Management of the Acute Hot Swollen Joint",
        include_str!("../fixtures/guidelines/Hot Swollen Joint.txt"),
    ),
    (
        "DKA",
        "Diabetic Ketoacidosis in Adults",
        include_str!("../fixtures/guidelines/DKA.txt"),
    ),
    (
        "Severe Hypertension",
        "Severe Hypertension in Adults",
        include_str!("../fixtures/guidelines/Severe Hypertension.txt"),
    ),
    (
        "Pericarditis",
        "Acute Pericarditis",
        include_str!("../fixtures/guidelines/Pericarditis.txt"),
    ),
    (
        "Hypokalaemia",
        "Hypokalaemia in Adults",
        include_str!("../fixtures/guidelines/Hypokalaemia.txt"),
    ),
    (
        "Pancreatitis",
        "Acute Pancreatitis",
        include_str!("../fixtures/guidelines/Pancreatitis.txt"),
    ),
];

/// The small three-topic corpus used by the prompt examples.
pub const CHRONIC_GUIDELINES: [(&str, &str, &str); 3] = [
    (
        "Hypertension",
        "Hypertension",
        include_str!("../fixtures/chronic/Hypertension.txt"),
    ),
    (
        "Diabetes",
        "Diabetes",
        include_str!("../fixtures/chronic/Diabetes.txt"),
    ),
    (
        "Heart Disease",
        "Heart Disease",
        include_str!("../fixtures/chronic/Heart Disease.txt"),
    ),
];

fn build(entries: &[(&str, &str, &str)]) -> Corpus {
    let guidelines = entries
        .iter()
        .map(|(topic, title, src)| {
            parse_guideline_source(src, topic, title).expect("bundled fixture parses")
        })
        .collect();
    Corpus::new(guidelines).expect("bundled fixture topics are unique")
}

pub fn sample_corpus() -> Corpus {
    build(&SAMPLE_GUIDELINES)
}

pub fn chronic_corpus() -> Corpus {
    build(&CHRONIC_GUIDELINES)
}
