//! The utility-guided policy loop.
//!
//! Each iteration makes one control call, scores all five action kinds with
//! `gain − w_c·cost − w_u·uncertainty − w_r·redundancy`, executes the
//! argmax, and re-checks termination. Every applied step logs the selected
//! action's full utility breakdown and the control signals behind it, so a
//! recorded trajectory can be audited offline.

use std::time::Instant;

use crate::redundancy::redundancy_score;
use crate::state::{
    budget_exhausted, should_terminate, Action, ActionKind, AgentState, EpisodeResult,
    Observation, ObservationSource, TerminationCheck, TerminationReason, TrajectoryStep,
};
use crate::utility::{compute_utility, cost_of, select_action, UtilityBreakdown};

use super::control::{answer_call, control_call, execute_retrieval, verify_call};
use super::{finish, Deps, EpisodeTask, StrategyConfig};

/// Builds the concrete action a kind would execute as, filling argument
/// slots from the control call's proposals and falling back to the question
/// for the query-taking kinds.
fn concretize(
    kind: ActionKind,
    proposed: &super::control::ProposedArguments,
    draft: Option<&str>,
    question: &str,
) -> Action {
    let query_or_question = |proposal: &Option<String>| {
        proposal.clone().unwrap_or_else(|| question.to_string())
    };
    match kind {
        ActionKind::Respond => Action::respond(),
        ActionKind::Stop => Action::stop(),
        ActionKind::Retrieve => Action::retrieve(query_or_question(&proposed.retrieve))
            .expect("question and proposals are non-empty"),
        ActionKind::ToolCall => Action::tool_call(query_or_question(&proposed.tool_call))
            .expect("question and proposals are non-empty"),
        ActionKind::Verify => {
            Action::verify(proposed.verify.clone().or_else(|| draft.map(str::to_string)))
        }
    }
}

pub(crate) fn run_policy_episode(
    task: &EpisodeTask,
    deps: &Deps<'_>,
    config: &StrategyConfig,
    mut state: AgentState,
    started: Instant,
) -> EpisodeResult {
    let mut best_draft: Option<String> = None;
    let mut final_answer: Option<String> = None;
    // Tokens billed by calls whose step was never applied (failed episodes).
    let mut unattributed: u64 = 0;

    let reason = loop {
        if let Some(reason) = budget_exhausted(&state) {
            break reason;
        }

        // (1) Ask the model for per-action gains, uncertainty, arguments.
        let outcome = match control_call(deps.backend, &task.question, &state) {
            Ok(outcome) => outcome,
            Err(_) => break TerminationReason::FailureFallback,
        };
        state.record_parse_result(outcome.signals.parse_ok);
        if let Some(draft) = &outcome.draft {
            best_draft = Some(draft.clone());
        }

        // (2) Score every candidate kind with the current cost model and
        // redundancy against the history so far.
        let mut candidates = Vec::with_capacity(ActionKind::ALL.len());
        let mut concrete = Vec::with_capacity(ActionKind::ALL.len());
        let mut scoring_failed = false;
        for kind in ActionKind::ALL {
            let action =
                concretize(kind, &outcome.arguments, best_draft.as_deref(), &task.question);
            let cost =
                cost_of(config.cost_mode, kind, &state, &config.cost_model, &config.budget);
            let redundancy = redundancy_score(&action, state.history(), &config.redundancy_mode);
            match compute_utility(
                kind,
                &outcome.signals,
                cost,
                redundancy,
                &config.weights,
                &config.mask,
            ) {
                Ok(breakdown) => {
                    candidates.push(breakdown);
                    concrete.push(action);
                }
                Err(_) => {
                    scoring_failed = true;
                    break;
                }
            }
        }
        if scoring_failed {
            unattributed += outcome.tokens;
            break TerminationReason::FailureFallback;
        }

        // (3) Argmax with canonical tie-breaking; after too many consecutive
        // control-parse failures the loop forces a final respond instead.
        let chosen = if state.consecutive_parse_failures
            >= state.budget().max_consecutive_parse_failures
        {
            ActionKind::Respond
        } else {
            match select_action(&candidates, &config.mask) {
                Ok(kind) => kind,
                Err(_) => {
                    unattributed += outcome.tokens;
                    break TerminationReason::FailureFallback;
                }
            }
        };

        // (4) Execute the chosen action.
        let mut step_tokens = outcome.tokens;
        let mut step_latency = outcome.latency_seconds;
        let position = ActionKind::ALL
            .iter()
            .position(|&k| k == chosen)
            .expect("chosen kind is always one of the five");
        let mut action = concrete.swap_remove(position);
        let observation = match chosen {
            ActionKind::Respond => {
                match answer_call(deps.backend, &task.question, &state, best_draft.as_deref()) {
                    Ok((answer, tokens, latency)) => {
                        step_tokens += tokens;
                        step_latency += latency;
                        final_answer = Some(answer);
                        Observation::none()
                    }
                    Err(_) => {
                        unattributed += outcome.tokens;
                        break TerminationReason::FailureFallback;
                    }
                }
            }
            ActionKind::Stop => Observation::none(),
            ActionKind::Retrieve => execute_retrieval(
                deps.index,
                action.argument().expect("retrieve always has an argument"),
                config.retrieval_k,
                ObservationSource::Retrieval,
            ),
            ActionKind::ToolCall => execute_retrieval(
                deps.index,
                action.argument().expect("tool_call always has an argument"),
                config.retrieval_k,
                ObservationSource::Tool,
            ),
            ActionKind::Verify => {
                match verify_call(deps.backend, &task.question, &state, best_draft.as_deref()) {
                    Ok((revised, observation, tokens, latency)) => {
                        step_tokens += tokens;
                        step_latency += latency;
                        if revised.is_some() {
                            best_draft = revised.clone();
                            // Re-anchor the verify argument on what was
                            // actually checked when no claim was proposed.
                            if action.argument().is_none() {
                                action = Action::verify(revised);
                            }
                        }
                        observation
                    }
                    Err(_) => {
                        unattributed += outcome.tokens;
                        break TerminationReason::FailureFallback;
                    }
                }
            }
        };

        // (5) Record the step; (6) decide whether the episode ends.
        let breakdown: UtilityBreakdown = candidates
            .iter()
            .find(|c| c.action_kind == chosen)
            .expect("all five kinds were scored")
            .clone();
        let step = TrajectoryStep {
            index: state.step_count,
            action,
            utility: Some(breakdown),
            signals: Some(outcome.signals.clone()),
            observation,
            tokens_this_step: step_tokens,
            latency_this_step_seconds: step_latency,
        };
        if state.apply_step(step).is_err() {
            break TerminationReason::FailureFallback;
        }
        match should_terminate(&state, chosen) {
            TerminationCheck::Continue => {}
            TerminationCheck::Terminate(reason) => break reason,
        }
    };

    let answer = final_answer.or(best_draft).unwrap_or_default();
    finish(task, state, reason, answer, unattributed, config, started)
}
