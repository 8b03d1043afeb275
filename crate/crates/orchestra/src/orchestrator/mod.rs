//! Episode orchestration: the utility-guided policy and every baseline it
//! is compared against, all driving the same state machine, retriever, and
//! backend so that token/latency accounting is method-agnostic.
//!
//! Strategies:
//! - [`Strategy::Policy`] — per-step argmax of
//!   `gain − w_c·cost − w_u·uncertainty − w_r·redundancy` over the five
//!   action kinds (see [`crate::utility`]).
//! - [`Strategy::Direct`] — a single answer call, no tools.
//! - [`Strategy::WorkflowMinimal`] — retrieve once, then answer.
//! - [`Strategy::WorkflowSearchTwice`] — retrieve, reformulate + retrieve
//!   again, then answer.
//! - [`Strategy::WorkflowSearchVerify`] — retrieve, verify the draft by a
//!   second retrieval, then answer.
//! - [`Strategy::Threshold`] — keep retrieving while the control call's
//!   uncertainty exceeds a fixed threshold, then answer.
//! - [`Strategy::React`] — a thought/action/observation loop with the
//!   `Search[...]` / `Finish[...]` grammar.
//!
//! Every strategy returns an [`EpisodeResult`]. Backend failure never
//! panics: the episode closes with
//! [`TerminationReason::FailureFallback`] and the best draft seen so far.
//! Token accounting is conservation-based: an episode's `total_tokens`
//! equals the sum of token bills over every backend call that returned,
//! whether or not the step it belonged to was ultimately applied.

mod baselines;
mod control;
mod policy;

pub use control::tags;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::metrics::f1_score;
use crate::redundancy::RedundancyMode;
use crate::retriever::Bm25Index;
use crate::state::{
    count_tool_calls, AgentState, Budget, EpisodeResult, StateError, TerminationReason,
};
use crate::utility::{AblationMask, CostMode, CostModelConfig, UtilityWeights};

/// Which decision procedure runs the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Policy,
    Direct,
    WorkflowMinimal,
    WorkflowSearchTwice,
    WorkflowSearchVerify,
    Threshold,
    React,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Policy,
        Strategy::Direct,
        Strategy::WorkflowMinimal,
        Strategy::WorkflowSearchTwice,
        Strategy::WorkflowSearchVerify,
        Strategy::Threshold,
        Strategy::React,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Policy => "policy",
            Strategy::Direct => "direct",
            Strategy::WorkflowMinimal => "workflow_minimal",
            Strategy::WorkflowSearchTwice => "workflow_search_twice",
            Strategy::WorkflowSearchVerify => "workflow_search_verify",
            Strategy::Threshold => "threshold",
            Strategy::React => "react",
        }
    }
}

/// Errors raised when a strategy configuration is rejected up front.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid budget: {0}")]
    Budget(#[from] StateError),
    #[error("invalid utility settings: {0}")]
    Utility(#[from] crate::utility::UtilityError),
    #[error("invalid redundancy settings: {0}")]
    Redundancy(#[from] crate::redundancy::RedundancyError),
    #[error("threshold_tau must lie in [0, 1], got {0}")]
    ThresholdTau(f64),
    #[error("react_max_steps must be at least 1")]
    ReactMaxSteps,
    #[error("retrieval_k must be at least 1")]
    RetrievalK,
}

/// Full configuration for running one strategy over episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub cost_mode: CostMode,
    pub redundancy_mode: RedundancyMode,
    pub weights: UtilityWeights,
    pub mask: AblationMask,
    pub budget: Budget,
    pub cost_model: CostModelConfig,
    /// Uncertainty threshold for [`Strategy::Threshold`]: retrieve while
    /// the control call reports uncertainty above this value.
    pub threshold_tau: f64,
    /// Step cap for [`Strategy::React`] (further capped by the budget).
    pub react_max_steps: usize,
    /// Documents fetched per retrieval.
    pub retrieval_k: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::Policy,
            cost_mode: CostMode::Step,
            redundancy_mode: RedundancyMode::Exact,
            weights: UtilityWeights::default(),
            mask: AblationMask::default(),
            budget: Budget::default(),
            cost_model: CostModelConfig::default(),
            threshold_tau: 0.5,
            react_max_steps: 6,
            retrieval_k: 3,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.budget.validate()?;
        self.weights.validate()?;
        self.cost_model.validate()?;
        self.redundancy_mode.validate()?;
        if !self.threshold_tau.is_finite() || !(0.0..=1.0).contains(&self.threshold_tau) {
            return Err(ConfigError::ThresholdTau(self.threshold_tau));
        }
        if self.react_max_steps == 0 {
            return Err(ConfigError::ReactMaxSteps);
        }
        if self.retrieval_k == 0 {
            return Err(ConfigError::RetrievalK);
        }
        Ok(())
    }
}

/// One question to answer, with the reference answer when scoring is wanted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTask {
    pub question_id: String,
    pub question: String,
    pub gold_answer: Option<String>,
}

/// Borrowed resources an episode runs against. The backend must be
/// episode-private when scripted (each episode owns its own cursor).
pub struct Deps<'a> {
    pub backend: &'a dyn Backend,
    pub index: &'a Bm25Index,
}

/// Runs one episode under `config`, never panicking on backend failure.
pub fn run_episode(task: &EpisodeTask, deps: &Deps<'_>, config: &StrategyConfig) -> EpisodeResult {
    let started = Instant::now();
    let state = match AgentState::new(task.question.clone(), config.budget.clone()) {
        Ok(state) => state,
        // An unusable question (empty) cannot even start: close immediately.
        Err(_) => {
            let state = AgentState::new("(unanswerable)", Budget::default())
                .expect("placeholder question is non-empty");
            return finish(
                task,
                state,
                TerminationReason::FailureFallback,
                String::new(),
                0,
                config,
                started,
            );
        }
    };
    match config.strategy {
        Strategy::Policy => policy::run_policy_episode(task, deps, config, state, started),
        Strategy::Direct => baselines::run_direct(task, deps, config, state, started),
        Strategy::WorkflowMinimal
        | Strategy::WorkflowSearchTwice
        | Strategy::WorkflowSearchVerify => {
            baselines::run_workflow(task, deps, config, state, started)
        }
        Strategy::Threshold => baselines::run_threshold(task, deps, config, state, started),
        Strategy::React => baselines::run_react(task, deps, config, state, started),
    }
}

/// Seals an episode into its result: attributes tokens, counts tool-backed
/// and redundant calls, and scores F1 against the gold answer if present.
pub(crate) fn finish(
    task: &EpisodeTask,
    mut state: AgentState,
    reason: TerminationReason,
    final_answer: String,
    unattributed_tokens: u64,
    config: &StrategyConfig,
    started: Instant,
) -> EpisodeResult {
    state.mark_terminated();
    let total_tokens = state.cumulative_tokens + unattributed_tokens;
    let steps = state.into_steps();
    let tool_calls = count_tool_calls(&steps);
    let redundant_tool_calls =
        crate::redundancy::count_redundant_calls(&steps, &config.redundancy_mode) as u64;
    let f1 = task
        .gold_answer
        .as_deref()
        .map(|gold| f1_score(&final_answer, gold).f1);
    EpisodeResult {
        question_id: task.question_id.clone(),
        final_answer,
        termination_reason: reason,
        total_tokens,
        wall_seconds: started.elapsed().as_secs_f64(),
        tool_calls,
        redundant_tool_calls,
        steps,
        f1,
    }
}
