//! Extraction-grounded question answering over line-indexed guidelines.
//!
//! A question is answered in two model calls: the model first names the
//! guideline topic from a fixed list, then returns the numbers of the
//! relevant lines of that guideline. The answer shown to the user is made
//! only of those lines, copied verbatim, so no generated text reaches it.
//!
//! ```
//! use clearline_core::{answer, backend::ScriptedBackend, extraction, fixtures};
//!
//! let corpus = fixtures::chronic_corpus();
//! let backend = ScriptedBackend::sequence(["Hypertension", "1"]);
//! let result = extraction::run_pipeline(
//!     "How do I define hypertensive emergency?",
//!     &corpus,
//!     &backend,
//!     &extraction::PipelineOptions::default(),
//! )
//! .unwrap();
//! let guideline = corpus.get(&result.topic.topic_id).unwrap();
//! let reply = answer::assemble_answer(guideline, &result.consolidated, "...").unwrap();
//! assert!(answer::render_text(&reply).ends_with("Please refer to Hypertension guidelines for more information."));
//! ```

pub mod answer;
pub mod backend;
pub mod corpus;
pub mod eval;
pub mod exec;
pub mod extraction;
pub mod fixtures;
pub mod jsonl;
pub mod prompting;

pub use answer::{assemble_answer, render_text, Answer, AnswerTemplate};
pub use backend::{BackendConfig, ChatBackend, HttpBackend, ScriptedBackend};
pub use corpus::{Corpus, Guideline, GuidelineLine};
pub use exec::Execution;
pub use extraction::{run_pipeline, ExtractionResult, LineSet, PipelineError, PipelineOptions};
