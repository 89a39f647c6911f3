use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clearline_core::backend::{BackendConfig, HttpBackend, ScriptedBackend, ENV_BASE_URL};
use clearline_core::corpus::{compute_stats, parse_guideline_source, Corpus};
use clearline_core::eval::{
    aggregate_timing, emit_report, load_gold, run_eval, summarize_outcomes, tally_annotations,
    AnnotationRecord, EvalReport, ReportFormat, TimingMode, TimingRecord,
};
use clearline_core::jsonl::read_jsonl;
use clearline_core::prompting::ShotStore;
use clearline_core::{
    assemble_answer, render_text, run_pipeline, ChatBackend, Execution, PipelineError,
    PipelineOptions,
};
use clearline_service::ServiceConfig;
use serde::Deserialize;

use crate::BackendArgs;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_TOPIC: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::UnrecognizedTopic { .. } => EXIT_TOPIC,
            PipelineError::Backend { .. } | PipelineError::PipelineExhausted { .. } => EXIT_BACKEND,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::load(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TopicEntry {
    Id(String),
    Full {
        topic_id: String,
        title: Option<String>,
    },
}

pub fn ingest(source: &Path, out: &Path) -> Result<()> {
    let topics_path = source.join("topics.json");
    let entries: Vec<TopicEntry> = serde_json::from_str(&read(&topics_path)?)
        .map_err(|e| CliError::config(format!("{}: {e}", topics_path.display())))?;
    let mut guidelines = Vec::with_capacity(entries.len());
    for entry in entries {
        let (topic_id, title) = match entry {
            TopicEntry::Id(id) => (id.clone(), id),
            TopicEntry::Full { topic_id, title } => {
                let title = title.unwrap_or_else(|| topic_id.clone());
                (topic_id, title)
            }
        };
        let path = source.join(format!("{topic_id}.txt"));
        let text = read(&path)?;
        let g = parse_guideline_source(&text, &topic_id, &title)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        guidelines.push(g);
    }
    let corpus = Corpus::new(guidelines).map_err(CliError::config)?;
    let stats = compute_stats(&corpus).map_err(CliError::config)?;
    corpus
        .save(out)
        .map_err(|e| CliError::config(format!("{}: {e}", out.display())))?;

    println!("{:<28} {:>6} {:>7}", "guideline", "lines", "words");
    for (topic, size) in &stats.per_guideline {
        println!("{topic:<28} {:>6} {:>7}", size.lines, size.words);
    }
    println!(
        "{:<28} {:>6.1} {:>7.1}",
        "mean", stats.line_count_mean, stats.word_count_mean
    );
    println!("wrote {} guidelines to {}", corpus.len(), out.display());
    Ok(())
}

fn make_backend(args: &BackendArgs) -> Result<Arc<dyn ChatBackend>> {
    if let Some(path) = &args.script {
        let script = ScriptedBackend::load(path).map_err(CliError::config)?;
        return Ok(Arc::new(script));
    }
    let url = args
        .backend
        .clone()
        .or_else(|| {
            std::env::var(ENV_BASE_URL)
                .ok()
                .filter(|u| !u.trim().is_empty())
        })
        .ok_or_else(|| {
            CliError::config(format!(
                "no backend: pass --backend, --script or set {ENV_BASE_URL}"
            ))
        })?;
    let mut config = BackendConfig::new(url, &args.model).with_env();
    if !args.timeout.is_finite() || args.timeout <= 0.0 {
        return Err(CliError::config("--timeout must be positive"));
    }
    config.request_timeout = Duration::from_secs_f64(args.timeout);
    Ok(Arc::new(
        HttpBackend::new(config).map_err(CliError::config)?,
    ))
}

fn pipeline_options(args: &BackendArgs, ensemble: usize) -> Result<PipelineOptions> {
    if ensemble == 0 {
        return Err(CliError::config("--ensemble must be at least 1"));
    }
    let shots = match &args.shots {
        Some(path) => ShotStore::load(path).map_err(CliError::config)?,
        None => ShotStore::bundled(),
    };
    Ok(PipelineOptions::default()
        .with_ensemble(ensemble)
        .with_shots(shots))
}

pub fn ask(
    corpus: &Path,
    question: &str,
    ensemble: usize,
    topic: Option<String>,
    args: &BackendArgs,
) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let backend = make_backend(args)?;
    let mut options = pipeline_options(args, ensemble)?;
    options.topic_override = topic;
    let result = run_pipeline(question, &corpus, backend.as_ref(), &options)?;
    let guideline = corpus
        .get(&result.topic.topic_id)
        .expect("topic is in the corpus");
    let answer =
        assemble_answer(guideline, &result.consolidated, question).map_err(CliError::config)?;
    println!("{}", render_text(&answer));

    let indices: Vec<String> = result.consolidated.iter().map(usize::to_string).collect();
    eprintln!("topic: {}", result.topic.topic_id);
    eprintln!("selected: [{}]", indices.join(" "));
    if !result.rejected.is_empty() {
        eprintln!("rejected responses: {}", result.rejected.len());
    }
    let t = &result.timings;
    eprintln!(
        "timings: topic {:.3}s, lines {:.3}s, total {:.3}s",
        t.topic_seconds, t.lines_seconds, t.total_seconds
    );
    Ok(())
}

pub fn eval(
    corpus: &Path,
    gold: &Path,
    ensemble: usize,
    out: &Path,
    sequential: bool,
    args: &BackendArgs,
) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let records = load_gold(&read(gold)?, &corpus)
        .map_err(|e| CliError::config(format!("{}: {e}", gold.display())))?;
    let backend = make_backend(args)?;
    let options = pipeline_options(args, ensemble)?;
    let execution = if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let outcomes = run_eval(&corpus, &records, backend.as_ref(), &options, execution);
    let summary = summarize_outcomes(&outcomes, &corpus).map_err(CliError::config)?;
    let failed = outcomes.iter().filter(|o| o.failed).count();
    let report = EvalReport::default().with_metrics(summary, outcomes);

    let markdown = emit_report(&report, ReportFormat::Markdown);
    write(out, &emit_report(&report, ReportFormat::Json))?;
    let md_path = out.with_extension("md");
    write(&md_path, &markdown)?;
    print!("{markdown}");
    eprintln!(
        "{} questions, {failed} failed; wrote {} and {}",
        records.len(),
        out.display(),
        md_path.display()
    );
    Ok(())
}

pub fn report(
    annotations: Option<&Path>,
    timings: Option<&Path>,
    counts: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    if annotations.is_none() && timings.is_none() {
        return Err(CliError::config(
            "nothing to report: pass --annotations and/or --timings",
        ));
    }
    let mut report = EvalReport::default();
    if let Some(path) = annotations {
        let records: Vec<AnnotationRecord> =
            read_jsonl(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        report = report.with_tallies(tally_annotations(&records).map_err(CliError::config)?);
    }
    if let Some(path) = timings {
        let counts_path = counts
            .ok_or_else(|| CliError::config("--timings needs --counts for the weighted total"))?;
        let counts: HashMap<String, usize> = serde_json::from_str(&read(counts_path)?)
            .map_err(|e| CliError::config(format!("{}: {e}", counts_path.display())))?;
        let records: Vec<TimingRecord> =
            read_jsonl(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let summaries = [
            TimingMode::UnweightedTopicMean,
            TimingMode::ResponseWeightedMean,
        ]
        .into_iter()
        .map(|mode| aggregate_timing(&records, &counts, mode))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(CliError::config)?;
        report = report.with_timing(summaries);
    }
    if let Some(out) = out {
        write(out, &emit_report(&report, ReportFormat::Json))?;
    }
    print!("{}", emit_report(&report, ReportFormat::Markdown));
    Ok(())
}

pub fn serve(
    config: Option<PathBuf>,
    corpus: Option<PathBuf>,
    bind: Option<String>,
    args: &BackendArgs,
) -> Result<()> {
    let mut config = match (config, corpus) {
        (Some(path), _) => ServiceConfig::load(&path).map_err(CliError::config)?,
        (None, Some(corpus)) => {
            let mut c = ServiceConfig::new(corpus);
            c.backend.model_name = args.model.clone();
            c.backend.request_timeout_secs = args.timeout;
            c.apply_env(|k| std::env::var(k).ok())
                .map_err(CliError::config)?;
            c
        }
        (None, None) => return Err(CliError::config("pass --config or --corpus")),
    };
    if let Some(url) = &args.backend {
        config.backend.base_url = url.clone();
    }
    if let Some(script) = &args.script {
        config.script_path = Some(script.clone());
    }
    if let Some(shots) = &args.shots {
        config.shots_path = Some(shots.clone());
    }
    if let Some(bind) = bind {
        config.bind_address = bind;
    }
    config.validate().map_err(CliError::config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::config)?;
    runtime
        .block_on(clearline_service::serve(config))
        .map_err(CliError::config)
}
