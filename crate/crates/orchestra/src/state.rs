//! Episode state and trajectory bookkeeping.
//!
//! An episode starts from a question, accumulates [`TrajectoryStep`]s, and
//! terminates for exactly one [`TerminationReason`]. All derived quantities
//! used elsewhere (cost estimates, redundancy scores, token totals) are pure
//! functions of the history stored here, so a recorded trajectory is enough
//! to replay or audit every decision the agent made.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::SignalEstimate;
use crate::utility::UtilityBreakdown;

/// Errors raised by state construction and transitions.
#[derive(Debug, Error)]
pub enum StateError {
    #[error("question must be non-empty")]
    EmptyQuestion,
    #[error("{kind} requires a non-empty argument")]
    MissingArgument { kind: ActionKind },
    #[error("{kind} does not take an argument")]
    UnexpectedArgument { kind: ActionKind },
    #[error("observation with no source must be empty")]
    NonEmptySourcelessObservation,
    #[error("step index {got} does not match step count {expected}")]
    OutOfOrderStep { expected: usize, got: usize },
    #[error("episode is already terminated")]
    EpisodeTerminated,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
}

// ─── Actions ────────────────────────────────────────────────────────────────

/// The five action kinds available to every strategy.
///
/// The declaration order doubles as the canonical tie-break order used when
/// two actions score the same utility: `respond < retrieve < tool_call <
/// verify < stop`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Produce the final answer and terminate.
    Respond,
    /// Query the retrieval index.
    Retrieve,
    /// Invoke the retrieval tool with a model-reformulated argument.
    ToolCall,
    /// Ask the model to check the current draft against gathered evidence.
    Verify,
    /// Terminate without producing a fresh answer.
    Stop,
}

impl ActionKind {
    /// All kinds in canonical (tie-break) order.
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Respond,
        ActionKind::Retrieve,
        ActionKind::ToolCall,
        ActionKind::Verify,
        ActionKind::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Respond => "respond",
            ActionKind::Retrieve => "retrieve",
            ActionKind::ToolCall => "tool_call",
            ActionKind::Verify => "verify",
            ActionKind::Stop => "stop",
        }
    }

    /// True for the kinds that invoke an external tool when executed.
    pub fn is_tool_backed(self) -> bool {
        matches!(self, ActionKind::Retrieve | ActionKind::ToolCall)
    }

    /// True for the kinds that end the episode when chosen.
    pub fn is_terminal(self) -> bool {
        matches!(self, ActionKind::Respond | ActionKind::Stop)
    }
}

impl std::fmt::Display for ActionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concrete action: a kind plus its argument, validated at construction.
///
/// `retrieve` and `tool_call` require a non-empty argument (the query);
/// `verify` takes an optional claim; `respond` and `stop` take none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    kind: ActionKind,
    argument: Option<String>,
}

impl Action {
    pub fn new(kind: ActionKind, argument: Option<String>) -> Result<Self, StateError> {
        let argument = argument.filter(|a| !a.trim().is_empty());
        match kind {
            ActionKind::Retrieve | ActionKind::ToolCall => {
                if argument.is_none() {
                    return Err(StateError::MissingArgument { kind });
                }
            }
            ActionKind::Respond | ActionKind::Stop => {
                if argument.is_some() {
                    return Err(StateError::UnexpectedArgument { kind });
                }
            }
            ActionKind::Verify => {}
        }
        Ok(Action { kind, argument })
    }

    pub fn respond() -> Self {
        Action { kind: ActionKind::Respond, argument: None }
    }

    pub fn stop() -> Self {
        Action { kind: ActionKind::Stop, argument: None }
    }

    pub fn retrieve(query: impl Into<String>) -> Result<Self, StateError> {
        Action::new(ActionKind::Retrieve, Some(query.into()))
    }

    pub fn tool_call(query: impl Into<String>) -> Result<Self, StateError> {
        Action::new(ActionKind::ToolCall, Some(query.into()))
    }

    pub fn verify(claim: Option<String>) -> Self {
        let argument = claim.filter(|c| !c.trim().is_empty());
        Action { kind: ActionKind::Verify, argument }
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn argument(&self) -> Option<&str> {
        self.argument.as_deref()
    }
}

/// A per-action table of `f64` values (base costs, priors, gains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionValues {
    pub respond: f64,
    pub retrieve: f64,
    pub tool_call: f64,
    pub verify: f64,
    pub stop: f64,
}

impl ActionValues {
    pub const fn uniform(value: f64) -> Self {
        ActionValues {
            respond: value,
            retrieve: value,
            tool_call: value,
            verify: value,
            stop: value,
        }
    }

    pub fn get(&self, kind: ActionKind) -> f64 {
        match kind {
            ActionKind::Respond => self.respond,
            ActionKind::Retrieve => self.retrieve,
            ActionKind::ToolCall => self.tool_call,
            ActionKind::Verify => self.verify,
            ActionKind::Stop => self.stop,
        }
    }

    pub fn set(&mut self, kind: ActionKind, value: f64) {
        match kind {
            ActionKind::Respond => self.respond = value,
            ActionKind::Retrieve => self.retrieve = value,
            ActionKind::ToolCall => self.tool_call = value,
            ActionKind::Verify => self.verify = value,
            ActionKind::Stop => self.stop = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        ActionKind::ALL.iter().all(|&k| self.get(k).is_finite())
    }
}

impl Default for ActionValues {
    fn default() -> Self {
        ActionValues::uniform(0.0)
    }
}

// ─── Observations ───────────────────────────────────────────────────────────

/// Where an observation came from. Tool-backed sources (`retrieval`, `tool`)
/// are what the episode-level tool-call counter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Retrieval,
    Tool,
    Verification,
    None,
}

impl ObservationSource {
    pub fn is_tool_backed(self) -> bool {
        matches!(self, ObservationSource::Retrieval | ObservationSource::Tool)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObservationSource::Retrieval => "retrieval",
            ObservationSource::Tool => "tool",
            ObservationSource::Verification => "verification",
            ObservationSource::None => "none",
        }
    }
}

/// The observed outcome of executing an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub source: ObservationSource,
    pub content: String,
    pub token_count: u64,
    pub latency_seconds: f64,
}

impl Observation {
    pub fn new(
        source: ObservationSource,
        content: String,
        token_count: u64,
        latency_seconds: f64,
    ) -> Result<Self, StateError> {
        if source == ObservationSource::None && !content.is_empty() {
            return Err(StateError::NonEmptySourcelessObservation);
        }
        Ok(Observation { source, content, token_count, latency_seconds })
    }

    /// The empty observation recorded for actions with nothing to observe.
    pub fn none() -> Self {
        Observation {
            source: ObservationSource::None,
            content: String::new(),
            token_count: 0,
            latency_seconds: 0.0,
        }
    }
}

// ─── Budget and termination ─────────────────────────────────────────────────

/// Resource limits every strategy must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Maximum number of trajectory steps (terminal step included).
    pub max_steps: usize,
    /// Optional cap on cumulative tokens across all model calls.
    pub max_total_tokens: Option<u64>,
    /// Consecutive control-parse failures tolerated before the loop forces a
    /// final `respond`.
    pub max_consecutive_parse_failures: usize,
}

impl Budget {
    pub fn new(
        max_steps: usize,
        max_total_tokens: Option<u64>,
        max_consecutive_parse_failures: usize,
    ) -> Result<Self, StateError> {
        let budget = Budget { max_steps, max_total_tokens, max_consecutive_parse_failures };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if self.max_steps == 0 {
            return Err(StateError::InvalidBudget("max_steps must be at least 1".into()));
        }
        if self.max_total_tokens == Some(0) {
            return Err(StateError::InvalidBudget(
                "max_total_tokens must be positive when set".into(),
            ));
        }
        if self.max_consecutive_parse_failures == 0 {
            return Err(StateError::InvalidBudget(
                "max_consecutive_parse_failures must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 8, max_total_tokens: None, max_consecutive_parse_failures: 3 }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The agent chose `stop`.
    StopAction,
    /// The agent chose `respond` and produced an answer.
    Responded,
    /// The step budget was exhausted.
    StepBudget,
    /// The token budget was exhausted.
    TokenBudget,
    /// Too many consecutive control-parse failures, or a backend error.
    FailureFallback,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::StopAction => "stop_action",
            TerminationReason::Responded => "responded",
            TerminationReason::StepBudget => "step_budget",
            TerminationReason::TokenBudget => "token_budget",
            TerminationReason::FailureFallback => "failure_fallback",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of a termination check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationCheck {
    Continue,
    Terminate(TerminationReason),
}

// ─── Trajectory ─────────────────────────────────────────────────────────────

/// One executed step: the action taken, the evidence used to choose it, and
/// what happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// Zero-based position in the trajectory.
    pub index: usize,
    pub action: Action,
    /// Utility breakdown of the chosen action (policy strategies only).
    pub utility: Option<UtilityBreakdown>,
    /// Model-reported signals backing the decision, when a control call ran.
    pub signals: Option<SignalEstimate>,
    pub observation: Observation,
    /// All tokens attributable to this step (control + execution calls).
    pub tokens_this_step: u64,
    pub latency_this_step_seconds: f64,
}

/// A piece of gathered evidence kept in the working context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub source: ObservationSource,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Terminated,
}

/// Mutable episode state threaded through every strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub question: String,
    /// Evidence snippets accumulated from non-empty observations, each
    /// truncated to `snippet_char_cap` characters.
    pub working_context: Vec<EvidenceSnippet>,
    history: Vec<TrajectoryStep>,
    pub step_count: usize,
    pub cumulative_tokens: u64,
    pub cumulative_latency_seconds: f64,
    pub consecutive_parse_failures: usize,
    pub status: EpisodeStatus,
    budget: Budget,
    snippet_char_cap: usize,
}

impl AgentState {
    /// Default cap on the characters of one evidence snippet.
    pub const DEFAULT_SNIPPET_CHAR_CAP: usize = 1500;

    pub fn new(question: impl Into<String>, budget: Budget) -> Result<Self, StateError> {
        let question = question.into();
        if question.trim().is_empty() {
            return Err(StateError::EmptyQuestion);
        }
        budget.validate()?;
        Ok(AgentState {
            question,
            working_context: Vec::new(),
            history: Vec::new(),
            step_count: 0,
            cumulative_tokens: 0,
            cumulative_latency_seconds: 0.0,
            consecutive_parse_failures: 0,
            status: EpisodeStatus::Running,
            budget,
            snippet_char_cap: Self::DEFAULT_SNIPPET_CHAR_CAP,
        })
    }

    pub fn with_snippet_char_cap(mut self, cap: usize) -> Self {
        self.snippet_char_cap = cap;
        self
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn history(&self) -> &[TrajectoryStep] {
        &self.history
    }

    pub fn snippet_char_cap(&self) -> usize {
        self.snippet_char_cap
    }

    /// Appends a step, updating every derived counter.
    ///
    /// The step's `index` must equal the current `step_count`, and the
    /// episode must still be running.
    pub fn apply_step(&mut self, step: TrajectoryStep) -> Result<(), StateError> {
        if self.status == EpisodeStatus::Terminated {
            return Err(StateError::EpisodeTerminated);
        }
        if step.index != self.step_count {
            return Err(StateError::OutOfOrderStep { expected: self.step_count, got: step.index });
        }
        if !step.observation.content.is_empty() {
            self.working_context.push(EvidenceSnippet {
                source: step.observation.source,
                text: truncate_chars(&step.observation.content, self.snippet_char_cap),
            });
        }
        self.step_count += 1;
        self.cumulative_tokens += step.tokens_this_step;
        self.cumulative_latency_seconds += step.latency_this_step_seconds;
        self.history.push(step);
        Ok(())
    }

    /// Records whether the latest control parse succeeded. Successes reset
    /// the consecutive-failure counter; failures increment it.
    pub fn record_parse_result(&mut self, ok: bool) {
        if ok {
            self.consecutive_parse_failures = 0;
        } else {
            self.consecutive_parse_failures += 1;
        }
    }

    pub fn mark_terminated(&mut self) {
        self.status = EpisodeStatus::Terminated;
    }

    pub fn into_steps(self) -> Vec<TrajectoryStep> {
        self.history
    }
}

/// Returns the budget-based termination reason, if any, in precedence order:
/// step budget, then token budget, then parse-failure fallback.
pub fn budget_exhausted(state: &AgentState) -> Option<TerminationReason> {
    if state.step_count >= state.budget.max_steps {
        return Some(TerminationReason::StepBudget);
    }
    if let Some(cap) = state.budget.max_total_tokens {
        if state.cumulative_tokens >= cap {
            return Some(TerminationReason::TokenBudget);
        }
    }
    if state.consecutive_parse_failures >= state.budget.max_consecutive_parse_failures {
        return Some(TerminationReason::FailureFallback);
    }
    None
}

/// Decides whether the episode ends after `chosen` was just executed.
///
/// Budget exhaustion takes precedence over action-based termination, so a
/// `respond` that lands exactly on the final budgeted step reports
/// `step_budget`.
pub fn should_terminate(state: &AgentState, chosen: ActionKind) -> TerminationCheck {
    if let Some(reason) = budget_exhausted(state) {
        return TerminationCheck::Terminate(reason);
    }
    match chosen {
        ActionKind::Stop => TerminationCheck::Terminate(TerminationReason::StopAction),
        ActionKind::Respond => TerminationCheck::Terminate(TerminationReason::Responded),
        _ => TerminationCheck::Continue,
    }
}

// ─── Episode results ────────────────────────────────────────────────────────

/// Everything recorded about one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub question_id: String,
    pub final_answer: String,
    pub termination_reason: TerminationReason,
    /// All tokens consumed by the episode, including control calls and calls
    /// that did not produce a trajectory step.
    pub total_tokens: u64,
    /// Wall-clock duration. Not deterministic; excluded from report
    /// comparisons.
    pub wall_seconds: f64,
    /// Number of steps whose observation came from an external tool.
    pub tool_calls: u64,
    /// How many of those tool calls repeated earlier ones.
    pub redundant_tool_calls: u64,
    pub steps: Vec<TrajectoryStep>,
    /// Token-level answer F1 against the gold answer, when one is known.
    pub f1: Option<f64>,
}

/// Counts the steps whose observation was produced by an external tool.
///
/// This deliberately counts observations rather than action kinds: a
/// `verify` that gathers its evidence through the retriever is a tool call,
/// while a `verify` answered purely by the model is not.
pub fn count_tool_calls(steps: &[TrajectoryStep]) -> u64 {
    steps.iter().filter(|s| s.observation.source.is_tool_backed()).count() as u64
}

/// Truncates to at most `cap` characters, respecting UTF-8 boundaries.
pub(crate) fn truncate_chars(text: &str, cap: usize) -> String {
    match text.char_indices().nth(cap) {
        Some((byte_idx, _)) => text[..byte_idx].to_string(),
        None => text.to_string(),
    }
}
