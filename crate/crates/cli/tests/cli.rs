use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn clearline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clearline"))
        .args(args)
        .env_remove("CLEARLINE_BASE_URL")
        .env_remove("CLEARLINE_API_KEY")
        .env_remove("CLEARLINE_ENSEMBLE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn ingest_sample(dir: &Path) -> String {
    let out = dir.join("corpus.json");
    let o = clearline(&[
        "ingest",
        "--source",
        fixtures().join("guidelines").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.to_str().unwrap().to_string()
}

/// Body lines per guideline and whitespace-separated words over those
/// lines, counted straight from the source files.
fn wc_oracle(dir: &Path, topic: &str) -> (usize, usize) {
    let text = std::fs::read_to_string(dir.join(format!("{topic}.txt"))).unwrap();
    let bodies: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .collect();
    (
        bodies.len(),
        bodies.iter().map(|b| b.split_whitespace().count()).sum(),
    )
}

#[test]
fn ingest_builds_six_topic_corpus_with_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus.json");
    let o = clearline(&[
        "ingest",
        "--source",
        fixtures().join("guidelines").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let corpus: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let topics = corpus["topics"].as_array().unwrap();
    assert_eq!(topics.len(), 6);
    assert!(topics.contains(&json!("Hypokalaemia")));

    let printed = stdout(&o);
    let topic_ids = [
        "Hot Swollen Joint",
        "DKA",
        "Severe Hypertension",
        "Pericarditis",
        "Hypokalaemia",
        "Pancreatitis",
    ];
    let mut line_sum = 0;
    let mut word_sum = 0;
    for topic in topic_ids {
        let (lines, words) = wc_oracle(&fixtures().join("guidelines"), topic);
        line_sum += lines;
        word_sum += words;
        let row = printed.lines().find(|l| l.starts_with(topic)).unwrap();
        let cols: Vec<&str> = row[topic.len()..].split_whitespace().collect();
        assert_eq!(cols, [lines.to_string(), words.to_string()], "{topic}");
    }
    let mean_row = printed.lines().find(|l| l.starts_with("mean")).unwrap();
    let cols: Vec<f64> = mean_row[4..]
        .split_whitespace()
        .map(|c| c.parse().unwrap())
        .collect();
    assert!((cols[0] - line_sum as f64 / 6.0).abs() <= 0.05);
    assert!((cols[1] - word_sum as f64 / 6.0).abs() <= 0.05);
}

#[test]
fn ingest_single_file_means_equal_its_counts() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    std::fs::write(src.join("topics.json"), r#"["Solo"]"#).unwrap();
    std::fs::write(
        src.join("Solo.txt"),
        "# A\none two three\n\n# B\nfour five\n",
    )
    .unwrap();
    let out = dir.path().join("c.json");
    let o = clearline(&[
        "ingest",
        "--source",
        src.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mean = stdout(&o)
        .lines()
        .find(|l| l.starts_with("mean"))
        .unwrap()
        .to_string();
    assert_eq!(
        mean.split_whitespace().collect::<Vec<_>>(),
        ["mean", "2.0", "5.0"]
    );
}

#[test]
fn ingest_error_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("topics.json"), r#"[{"topic_id": "Bad"}]"#).unwrap();
    std::fs::write(dir.path().join("Bad.txt"), "\norphan line\n# S\nok\n").unwrap();
    let o = clearline(&[
        "ingest",
        "--source",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().join("c.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("Bad.txt") && err.contains("line 2"), "{err}");
}

const DKA_TRACE: &str = "The question is about diagnosing DKA.\nLine 0 gives the bedside tests and line 1 the criteria.\nSo the most relevant lines are line 0 and line 1.\n</think>\n\n[0 1]";

#[test]
fn ask_dka_reasoning_run_renders_answer_block() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let script = write_json(dir.path(), "s.json", &json!(["DKA", DKA_TRACE]));
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "How do I diagnose DKA?",
        "--script",
        &script,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let block = "DIAGNOSIS\n\
PERFORM A CBG, VBG AND URINALYSIS\n\
Blood glucose levels of at least 11.1 mmol/L or a known history of diabetes; \
blood ketones of 3 mmol/L or higher, or urine ketones greater than 2+; \
acidosis, indicated by venous or arterial pH below 7.3 and/or HCO3- levels under 15 mmol/L.\n\
\n\
Please refer to DKA guidelines for more information.\n";
    assert!(
        out.starts_with("Please follow the steps below:\n\n"),
        "{out}"
    );
    assert!(out.ends_with(block), "{out}");
    assert!(!out.contains("think"));
    let err = stderr(&o);
    assert!(err.contains("selected: [0 1]"), "{err}");
    assert!(err.contains("timings: topic"), "{err}");
}

#[test]
fn ask_is_deterministic_under_a_script() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let script = write_json(dir.path(), "s.json", &json!(["Pancreatitis", "1 2 3"]));
    let args = [
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "What investigations?",
        "--script",
        &script,
    ];
    let a = clearline(&args);
    let b = clearline(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn ask_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());

    let script = write_json(dir.path(), "unknown.json", &json!(["Cardiology"]));
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "q?",
        "--script",
        &script,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("Cardiology"));

    let script = write_json(dir.path(), "short.json", &json!(["DKA"]));
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "q?",
        "--script",
        &script,
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let script = write_json(
        dir.path(),
        "bad.json",
        &json!(["DKA", "lines a and b", "still not numbers"]),
    );
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "q?",
        "--script",
        &script,
    ]);
    assert_eq!(o.status.code(), Some(4));

    let o = clearline(&[
        "ask",
        "--corpus",
        "/nonexistent/c.json",
        "--question",
        "q?",
        "--script",
        &script,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = clearline(&["ask", "--corpus", &corpus, "--question", "q?"]);
    assert_eq!(o.status.code(), Some(2));
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "q?",
        "--script",
        &script,
        "--topic",
        "Cardiology",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ask_topic_override_uses_one_call() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = ingest_sample(dir.path());
    let script = write_json(dir.path(), "s.json", &json!(["0"]));
    let o = clearline(&[
        "ask",
        "--corpus",
        &corpus,
        "--question",
        "Admit?",
        "--topic",
        "pericarditis",
        "--script",
        &script,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).ends_with("Please refer to Pericarditis guidelines for more information.\n"));
}

struct Question {
    topic: &'static str,
    gold: Vec<usize>,
    selected: Vec<usize>,
}

fn gold_file(dir: &Path, questions: &[Question]) -> String {
    let text: String = questions
        .iter()
        .enumerate()
        .map(|(i, q)| {
            json!({"question_id": format!("q{i}"), "topic": q.topic, "question": format!("Question {i}?"), "gold_indices": q.gold})
                .to_string()
                + "\n"
        })
        .collect();
    let path = dir.join("gold.jsonl");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Sequence script for `ensemble` identical runs per question.
fn eval_script(dir: &Path, questions: &[Question], ensemble: usize) -> String {
    let mut script = Vec::new();
    for q in questions {
        script.push(q.topic.to_string());
        let line: Vec<String> = q.selected.iter().map(usize::to_string).collect();
        for _ in 0..ensemble {
            script.push(line.join(" "));
        }
    }
    write_json(dir, "script.json", &json!(script))
}

fn run_eval(dir: &Path, questions: &[Question], ensemble: usize, script: &str) -> (Output, Value) {
    let corpus = ingest_sample(dir);
    let gold = gold_file(dir, questions);
    let out = dir.join("report.json");
    let ensemble = ensemble.to_string();
    let o = clearline(&[
        "eval",
        "--corpus",
        &corpus,
        "--gold",
        &gold,
        "--script",
        script,
        "--ensemble",
        &ensemble,
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(&out)
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap_or(Value::Null);
    (o, report)
}

fn range(a: usize, b: usize) -> Vec<usize> {
    (a..b).collect()
}

#[test]
fn eval_perfect_selection_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let questions = vec![
        Question {
            topic: "DKA",
            gold: vec![0, 1],
            selected: vec![0, 1],
        },
        Question {
            topic: "Pericarditis",
            gold: vec![3],
            selected: vec![3],
        },
    ];
    let script = eval_script(dir.path(), &questions, 5);
    let (o, report) = run_eval(dir.path(), &questions, 5, &script);
    assert!(o.status.success(), "{}", stderr(&o));
    for row in report["per_topic"].as_object().unwrap().values() {
        assert_eq!(
            row,
            &json!({"precision": 1.0, "recall": 1.0, "f_score": 1.0})
        );
    }
    assert!(report["questions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|q| q["failed"] == false));
    assert!(dir.path().join("report.md").exists());
}

#[test]
fn eval_issues_one_plus_k_calls_per_question() {
    let dir = tempfile::tempdir().unwrap();
    let questions = vec![
        Question {
            topic: "DKA",
            gold: vec![0],
            selected: vec![0],
        },
        Question {
            topic: "Hypokalaemia",
            gold: vec![3],
            selected: vec![3],
        },
    ];
    // exactly 2 * (1 + 3) responses: any extra call would exhaust the script
    let script = eval_script(dir.path(), &questions, 3);
    let (o, report) = run_eval(dir.path(), &questions, 3, &script);
    assert!(o.status.success());
    assert!(report["questions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|q| q["failed"] == false));

    let dir = tempfile::tempdir().unwrap();
    let mut short: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(&script).unwrap()).unwrap();
    short.pop();
    let script = write_json(dir.path(), "short.json", &json!(short));
    let (o, report) = run_eval(dir.path(), &questions, 3, &script);
    assert!(o.status.success());
    let qs = report["questions"].as_array().unwrap();
    assert_eq!(qs[0]["failed"], false);
    assert_eq!(qs[1]["failed"], true);
    assert_eq!(qs[1]["metrics"]["f_score"], 0.0);
}

#[test]
fn eval_superset_selection_has_full_recall() {
    let dir = tempfile::tempdir().unwrap();
    let questions = vec![
        Question {
            topic: "DKA",
            gold: vec![0, 1],
            selected: range(0, 6),
        },
        Question {
            topic: "Pancreatitis",
            gold: vec![4],
            selected: range(2, 9),
        },
        Question {
            topic: "Hot Swollen Joint",
            gold: vec![1, 2],
            selected: vec![1, 2, 3],
        },
    ];
    let script = eval_script(dir.path(), &questions, 1);
    let (o, report) = run_eval(dir.path(), &questions, 1, &script);
    assert!(o.status.success());
    for row in report["per_topic"].as_object().unwrap().values() {
        assert_eq!(row["recall"], 1.0);
    }
    assert!(stdout(&o).contains("| 1.00 |"));
}

#[test]
fn eval_engineered_fixture_reproduces_average_row() {
    // selections sized so that per-topic precision lands on the reference column
    let questions = vec![
        Question {
            topic: "Hot Swollen Joint",
            gold: vec![0],
            selected: range(0, 10),
        },
        Question {
            topic: "DKA",
            gold: range(0, 11),
            selected: range(0, 25),
        },
        Question {
            topic: "Severe Hypertension",
            gold: range(0, 5),
            selected: range(0, 18),
        },
        Question {
            topic: "Pericarditis",
            gold: range(0, 11),
            selected: range(0, 13),
        },
        Question {
            topic: "Hypokalaemia",
            gold: range(0, 7),
            selected: range(0, 17),
        },
        Question {
            topic: "Pancreatitis",
            gold: vec![0],
            selected: vec![0, 1],
        },
        Question {
            topic: "Pancreatitis",
            gold: range(0, 14),
            selected: range(0, 27),
        },
    ];
    // independent oracle: ratios per question, unweighted means per topic, then across topics
    let f = |p: f64| 2.0 * p / (p + 1.0);
    let per_topic: Vec<Vec<f64>> = vec![
        vec![1.0 / 10.0],
        vec![11.0 / 25.0],
        vec![5.0 / 18.0],
        vec![11.0 / 13.0],
        vec![7.0 / 17.0],
        vec![1.0 / 2.0, 14.0 / 27.0],
    ];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let p_avg = mean(&per_topic.iter().map(|t| mean(t)).collect::<Vec<_>>());
    let f_avg = mean(
        &per_topic
            .iter()
            .map(|t| mean(&t.iter().map(|&p| f(p)).collect::<Vec<_>>()))
            .collect::<Vec<_>>(),
    );
    assert_eq!(format!("{p_avg:.2}"), "0.43");
    assert_eq!(format!("{f_avg:.2}"), "0.57");

    let dir = tempfile::tempdir().unwrap();
    let script = eval_script(dir.path(), &questions, 2);
    let (o, report) = run_eval(dir.path(), &questions, 2, &script);
    assert!(o.status.success(), "{}", stderr(&o));
    let avg = &report["average"];
    assert!((avg["precision"].as_f64().unwrap() - p_avg).abs() < 1e-12);
    assert_eq!(avg["recall"], 1.0);
    assert!((avg["f_score"].as_f64().unwrap() - f_avg).abs() < 1e-12);
    assert!(
        stdout(&o).contains("| Average | 0.43 | 1.00 | 0.57 |"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn eval_rejects_bad_gold() {
    let dir = tempfile::tempdir().unwrap();
    let questions = vec![Question {
        topic: "DKA",
        gold: vec![99],
        selected: vec![0],
    }];
    let script = eval_script(dir.path(), &questions, 1);
    let (o, _) = run_eval(dir.path(), &questions, 1, &script);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn report_emits_tallies_and_both_timing_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut ann = String::new();
    for (i, (rel, comp)) in [
        ("very_relevant", "satisfactory"),
        ("relevant", "minor_addition"),
        ("very_relevant", "satisfactory"),
    ]
    .iter()
    .enumerate()
    {
        ann += &json!({"question_id": format!("a{i}"), "task_kind": "topic_based", "relevance": rel, "completeness": comp}).to_string();
        ann.push('\n');
    }
    std::fs::write(dir.path().join("ann.jsonl"), ann).unwrap();
    let timings = [("DKA", 98.67, 28.27), ("Pancreatitis", 87.0, 36.57)]
        .iter()
        .enumerate()
        .map(|(i, (t, h, c))| json!({"question_id": format!("t{i}"), "topic": t, "human_seconds": h, "chatbot_seconds": c}).to_string() + "\n")
        .collect::<String>();
    std::fs::write(dir.path().join("t.jsonl"), timings).unwrap();
    let counts = write_json(
        dir.path(),
        "counts.json",
        &json!({"DKA": 3, "Pancreatitis": 1}),
    );
    let out = dir.path().join("r.json");
    let o = clearline(&[
        "report",
        "--annotations",
        dir.path().join("ann.jsonl").to_str().unwrap(),
        "--timings",
        dir.path().join("t.jsonl").to_str().unwrap(),
        "--counts",
        &counts,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let timing = report["timing"].as_array().unwrap();
    assert_eq!(timing.len(), 2);
    let unweighted = (98.67 + 87.0) / 2.0;
    let weighted = (3.0 * 98.67 + 87.0) / 4.0;
    assert!((timing[0]["total_human"].as_f64().unwrap() - unweighted).abs() < 1e-9);
    assert!((timing[1]["total_human"].as_f64().unwrap() - weighted).abs() < 1e-9);
    assert_eq!(report["tallies"]["topic_based"]["records"], 3);
    let md = stdout(&o);
    assert!(md.contains("Response times"), "{md}");
    assert!(md.contains("Annotation tallies"), "{md}");
}

#[test]
fn report_malformed_line_names_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let good = json!({"question_id": "a", "relevance": "relevant", "completeness": "satisfactory", "task_kind": "topic_based"});
    std::fs::write(
        dir.path().join("ann.jsonl"),
        format!("{good}\n{{not json\n"),
    )
    .unwrap();
    let o = clearline(&[
        "report",
        "--annotations",
        dir.path().join("ann.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}
