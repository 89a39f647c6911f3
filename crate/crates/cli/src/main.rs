//! `clearline`: ingest guideline corpora, ask questions, evaluate, serve.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "clearline",
    version,
    about = "Extraction-grounded guideline question answering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of guideline sources into a corpus file.
    Ingest {
        /// Directory with topics.json and one {topic_id}.txt per topic.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one question.
    Ask {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long, env = "CLEARLINE_ENSEMBLE", default_value_t = 1)]
        ensemble: usize,
        /// Skip topic identification and use this guideline.
        #[arg(long)]
        topic: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run the pipeline over a gold set and write JSON and Markdown reports.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 5)]
        ensemble: usize,
        /// JSON report path; the Markdown report goes next to it as .md.
        #[arg(long)]
        out: PathBuf,
        /// Evaluate questions one at a time.
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Annotation tallies and response-time tables from record files.
    Report {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        timings: Option<PathBuf>,
        /// JSON object of per-topic response counts, used to weight timing totals.
        #[arg(long)]
        counts: Option<PathBuf>,
        /// Write JSON here; Markdown always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus file, when no config file is given.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

#[derive(Args, Clone, Default)]
struct BackendArgs {
    /// Base URL of an OpenAI-compatible server (default: $CLEARLINE_BASE_URL).
    #[arg(long, conflicts_with = "script")]
    backend: Option<String>,
    /// JSON response script instead of a live model.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    model: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Few-shot exemplar file; bundled exemplars otherwise.
    #[arg(long)]
    shots: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("CLEARLINE_LOG")
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { source, out } => commands::ingest(&source, &out),
        Command::Ask {
            corpus,
            question,
            ensemble,
            topic,
            backend,
        } => commands::ask(&corpus, &question, ensemble, topic, &backend),
        Command::Eval {
            corpus,
            gold,
            ensemble,
            out,
            sequential,
            backend,
        } => commands::eval(&corpus, &gold, ensemble, &out, sequential, &backend),
        Command::Report {
            annotations,
            timings,
            counts,
            out,
        } => commands::report(
            annotations.as_deref(),
            timings.as_deref(),
            counts.as_deref(),
            out.as_deref(),
        ),
        Command::Serve {
            config,
            corpus,
            bind,
            backend,
        } => commands::serve(config, corpus, bind, &backend),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
