//! Utility-guided orchestration for tool-using question-answering agents.
//!
//! The crate is organised around a small, inspectable agent loop. At every
//! step the agent scores each available action with an explicit utility:
//!
//! ```text
//! U(a | s) = Gain(a | s) - w_cost * Cost(a | s)
//!                        - w_uncertainty * Uncertainty(s)
//!                        - w_redundancy * Redundancy(a | s)
//! ```
//!
//! and executes the argmax. Gain and uncertainty are self-reported by the
//! language model through a structured control protocol; cost comes from one
//! of three interchangeable cost models; redundancy is computed from the
//! trajectory recorded so far. Everything the loop consumes is a pure
//! function of [`state::AgentState`], which keeps runs replayable.
//!
//! Module map:
//!
//! * [`state`] — episode state, trajectory records, budgets, termination.
//! * [`utility`] — utility terms, cost models, ablation masks, argmax.
//! * [`redundancy`] — exact and semantic repeat-call detection.
//! * [`retriever`] — in-memory BM25 index used as the retrieval tool.
//! * [`backend`] — model backends: scripted replay and OpenAI-compatible HTTP.
//! * [`orchestrator`] — the policy loop plus direct/workflow/threshold/ReAct
//!   baselines, all sharing one episode result type.
//! * [`metrics`] — answer F1, efficiency, correlation, calibration buckets.
//! * [`eval`] — dataset loading, experiment grids, reports, CSV export.
//!
//! The `parallel` feature (on by default) fans episode batches out with
//! rayon; with the feature disabled, or `jobs = 1`, evaluation runs on a
//! single thread and produces byte-identical reports.

pub mod backend;
pub mod eval;
pub mod metrics;
pub mod orchestrator;
pub mod redundancy;
pub mod retriever;
pub mod state;
pub mod utility;

pub use backend::{Backend, BackendError, BackendRequest, BackendResponse};
pub use eval::{run_experiment, ExperimentInputs, GridName, RunContext, RunReport};
pub use orchestrator::{run_episode, Deps, EpisodeTask, Strategy, StrategyConfig};
pub use state::{AgentState, Budget, EpisodeResult, TerminationReason};
pub use utility::{AblationMask, CostMode, UtilityWeights};
