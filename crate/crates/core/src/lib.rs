//! Evaluation harness for multiple-choice cognitive-bias questions.
//!
//! The crate is organised bottom-up:
//!
//! - [`taxonomy`] and [`dataset`]: bias labels, MCQ items and dataset validation
//! - [`prompt`]: exact prompt text for every decision mode and inspection scope
//! - [`gateway`]: chat-completion providers behind a record/replay cache
//! - [`parser`]: choice letters and bias labels out of free-text replies
//! - [`engine`]: the answer / detect / re-ask feedback loop and resumable runs
//! - [`scoring`]: TT/TF/FT/FF/O verdicts and the D, A, E metrics
//! - [`review`]: reasoning annotations and the review queue
//! - [`report`]: summary tables and plot series

pub mod dataset;
pub mod engine;
pub mod gateway;
pub mod parser;
pub mod prompt;
pub mod report;
pub mod review;
pub mod scoring;
pub mod taxonomy;

pub use dataset::{Dataset, McqItem, OptionLabel, ValidationReport, Violation, ViolationRule};
pub use engine::{ItemTranscript, LoopState, RunConfig, RunRecord, RunStatus};
pub use gateway::{CachePolicy, Gateway, ModelReply, ModelRequest};
pub use parser::{DetectedBias, MatchClass, ParsedChoice};
pub use prompt::{Condition, DecisionMode, InspectionScope, RenderedPrompt, SbiSource, ScopeKind};
pub use scoring::{Metrics, MetricsSummary, ReasoningAnnotation, Verdict, VerdictKind, VerdictTally};
pub use taxonomy::{BiasLabel, BiasTaxonomy, LabelKind, ParentCategory};
