//! Evaluation harness: datasets, experiment grids, batch execution, and
//! structured run reports.
//!
//! The pipeline is pure with respect to the filesystem — callers load a
//! dataset ([`load_dataset`]), build a corpus and index, pick a grid
//! ([`GridName`]), and get back a [`RunReport`] plus CSV renderings; writing
//! anything to disk is the caller's business. With a scripted backend and a
//! fixed sampling seed the whole pipeline is deterministic up to wall-clock
//! fields (see [`clear_wall_fields`]).

mod dataset;
mod experiment;
mod grid;
mod report;

pub use dataset::{corpus_from_examples, load_dataset, QaExample};
pub use experiment::{
    default_bucket_edges, run_batch, run_experiment, ExperimentInputs, DEFAULT_DEPTH_STEPS,
};
pub use grid::{method_specs, GridName, MethodSpec};
pub use report::{
    buckets_csv, clear_wall_fields, depth_csv, pareto_csv, summary_csv, DepthPoint, MethodReport,
    RunContext, RunMetadata, RunReport, SignalAnalysis,
};

use crate::metrics::MetricsError;
use crate::orchestrator::ConfigError;

/// Errors raised while preparing or aggregating an evaluation run.
/// Individual episode failures are not errors — they close their episode
/// with a fallback result and stay in the report.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot read dataset {path}: {reason}")]
    Dataset { path: String, reason: String },
    #[error("sample of {requested} requested but only {available} examples available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid example {id}: {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("invalid strategy configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("metrics failure: {0}")]
    Metrics(#[from] MetricsError),
    #[error("experiment has no examples to run")]
    NoExamples,
}
