//! Test-only oracles, kept independent of the library code they check.
#![allow(dead_code)]

use clearline_core::answer::AnswerTemplate;

/// A reasoning-model line response for "How do I diagnose DKA?" against the
/// sample DKA guideline: deliberation, the close delimiter, then `[0 1]`.
pub const DKA_REASONING_RESPONSE: &str = "\
Okay, the question asks how DKA is diagnosed, so I need the lines that give the diagnostic tests and criteria.

Line 0 lists the bedside tests (CBG, VBG and urinalysis) used to confirm the diagnosis.

Line 1 gives the glucose, ketone and acidosis thresholds, which are the criteria themselves.

Line 2 covers precipitating causes, which matter later but do not define the diagnosis.

The remaining lines cover requests, fluids, potassium, insulin, monitoring and resolution, which are management rather than diagnosis.

So the most relevant lines are line 0 and line 1.
</think>

[0 1]";

/// Inverse of the numbered context listing: `"{index}: {section}: {body}"`
/// per line. The section is everything up to the first `": "` that is
/// followed by a body matching `expected_sections`, which keeps sections
/// that themselves contain `": "` unambiguous.
pub fn parse_numbered_context(
    text: &str,
    expected_sections: &[String],
) -> Vec<(usize, String, String)> {
    text.split('\n')
        .map(|line| {
            let (index, rest) = line.split_once(": ").expect("index separator");
            let section = expected_sections
                .iter()
                .filter(|s| {
                    rest.len() > s.len() + 2
                        && rest.starts_with(s.as_str())
                        && rest[s.len()..].starts_with(": ")
                })
                .max_by_key(|s| s.len())
                .expect("known section prefix")
                .clone();
            let body = rest[section.len() + 2..].to_string();
            (index.parse().expect("numeric index"), section, body)
        })
        .collect()
}

/// Splits a rendered answer back into `(heading, bodies)` blocks, dropping
/// the preamble and footer. Returns `None` for the empty-answer rendering.
pub fn parse_rendered_answer(text: &str) -> Option<Vec<(String, Vec<String>)>> {
    let t = AnswerTemplate::default();
    let rest = text.strip_prefix(&format!("{}\n\n", t.preamble))?;
    let footer_at = rest.rfind("\n\n").map(|i| i + 2).unwrap_or(0);
    let blocks = &rest[..footer_at];
    Some(
        blocks
            .split("\n\n")
            .filter(|b| !b.is_empty())
            .map(|block| {
                let mut lines = block.split('\n').filter(|l| !l.is_empty());
                let heading = lines.next().expect("heading").to_string();
                (heading, lines.map(str::to_string).collect())
            })
            .collect(),
    )
}

/// Brute-force recall over plain index lists.
pub fn oracle_recall(selected: &[usize], gold: &[usize]) -> f64 {
    let mut hit = 0usize;
    let mut distinct_gold: Vec<usize> = Vec::new();
    for &g in gold {
        if !distinct_gold.contains(&g) {
            distinct_gold.push(g);
        }
    }
    for &g in &distinct_gold {
        if selected.contains(&g) {
            hit += 1;
        }
    }
    hit as f64 / distinct_gold.len() as f64
}

/// Brute-force union via a membership table.
pub fn oracle_union(runs: &[Vec<usize>], universe: usize) -> Vec<usize> {
    let mut seen = vec![false; universe];
    for run in runs {
        for &i in run {
            seen[i] = true;
        }
    }
    (0..universe).filter(|&i| seen[i]).collect()
}
