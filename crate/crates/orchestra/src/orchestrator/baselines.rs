//! Baseline strategies: direct answering, the three fixed workflows, the
//! uncertainty-threshold controller, and a minimal ReAct loop.
//!
//! All of them run on the same state machine and accounting rules as the
//! utility policy; the only difference is how the next action is chosen.

use std::time::Instant;

use crate::state::{
    budget_exhausted, should_terminate, Action, ActionKind, AgentState, EpisodeResult,
    Observation, ObservationSource, TerminationCheck, TerminationReason, TrajectoryStep,
};

use super::control::{
    answer_call, control_call, execute_retrieval, parse_react_action, react_call,
    reformulate_call, workflow_verify_call, ReactAction,
};
use super::{finish, Deps, EpisodeTask, Strategy, StrategyConfig};

fn step(
    state: &AgentState,
    action: Action,
    signals: Option<crate::backend::SignalEstimate>,
    observation: Observation,
    tokens: u64,
    latency: f64,
) -> TrajectoryStep {
    TrajectoryStep {
        index: state.step_count,
        action,
        utility: None,
        signals,
        observation,
        tokens_this_step: tokens,
        latency_this_step_seconds: latency,
    }
}

/// One answer call, one respond step, no tools.
pub(crate) fn run_direct(
    task: &EpisodeTask,
    deps: &Deps<'_>,
    config: &StrategyConfig,
    mut state: AgentState,
    started: Instant,
) -> EpisodeResult {
    match answer_call(deps.backend, &task.question, &state, None) {
        Ok((answer, tokens, latency)) => {
            let respond = step(&state, Action::respond(), None, Observation::none(), tokens, latency);
            let reason = match state.apply_step(respond) {
                Ok(()) => match should_terminate(&state, ActionKind::Respond) {
                    TerminationCheck::Terminate(reason) => reason,
                    TerminationCheck::Continue => TerminationReason::Responded,
                },
                Err(_) => TerminationReason::FailureFallback,
            };
            finish(task, state, reason, answer, 0, config, started)
        }
        Err(_) => finish(
            task,
            state,
            TerminationReason::FailureFallback,
            String::new(),
            0,
            config,
            started,
        ),
    }
}

/// The stages a fixed workflow steps through, in order.
enum WorkflowStage {
    RetrieveQuestion,
    RetrieveReformulated,
    VerifyByRetrieval,
    Respond,
}

/// Fixed pipelines: minimal (retrieve → respond), search-twice (retrieve →
/// reformulated retrieve → respond), search+verify (retrieve → verify-by-
/// retrieval → respond). A budget gate runs before every stage, so tight
/// budgets close the episode early with the partial trajectory.
pub(crate) fn run_workflow(
    task: &EpisodeTask,
    deps: &Deps<'_>,
    config: &StrategyConfig,
    mut state: AgentState,
    started: Instant,
) -> EpisodeResult {
    let stages: &[WorkflowStage] = match config.strategy {
        Strategy::WorkflowMinimal => {
            &[WorkflowStage::RetrieveQuestion, WorkflowStage::Respond]
        }
        Strategy::WorkflowSearchTwice => &[
            WorkflowStage::RetrieveQuestion,
            WorkflowStage::RetrieveReformulated,
            WorkflowStage::Respond,
        ],
        Strategy::WorkflowSearchVerify => &[
            WorkflowStage::RetrieveQuestion,
            WorkflowStage::VerifyByRetrieval,
            WorkflowStage::Respond,
        ],
        _ => unreachable!("run_workflow only dispatches workflow strategies"),
    };

    let mut final_answer = String::new();
    let mut reason = TerminationReason::FailureFallback;
    let mut completed = true;
    for stage in stages {
        if let Some(budget_reason) = budget_exhausted(&state) {
            reason = budget_reason;
            completed = false;
            break;
        }
        let applied = match stage {
            WorkflowStage::RetrieveQuestion => {
                let observation = execute_retrieval(
                    deps.index,
                    &task.question,
                    config.retrieval_k,
                    ObservationSource::Retrieval,
                );
                let action = Action::retrieve(task.question.clone())
                    .expect("the question is non-empty");
                state.apply_step(step(&state, action, None, observation, 0, 0.0))
            }
            WorkflowStage::RetrieveReformulated => {
                match reformulate_call(deps.backend, &task.question, &state) {
                    Ok((query, tokens, latency)) => {
                        let observation = execute_retrieval(
                            deps.index,
                            &query,
                            config.retrieval_k,
                            ObservationSource::Retrieval,
                        );
                        let action =
                            Action::retrieve(query).expect("reformulated query is non-empty");
                        state.apply_step(step(&state, action, None, observation, tokens, latency))
                    }
                    Err(_) => {
                        completed = false;
                        break;
                    }
                }
            }
            WorkflowStage::VerifyByRetrieval => {
                match workflow_verify_call(deps.backend, &task.question, &state, None) {
                    Ok((claim, query, tokens, latency)) => {
                        // Verification gathers its evidence through the
                        // retriever, so the observation is tool-backed.
                        let observation = execute_retrieval(
                            deps.index,
                            &query,
                            config.retrieval_k,
                            ObservationSource::Retrieval,
                        );
                        let action = Action::verify(claim.or(Some(query)));
                        state.apply_step(step(&state, action, None, observation, tokens, latency))
                    }
                    Err(_) => {
                        completed = false;
                        break;
                    }
                }
            }
            WorkflowStage::Respond => {
                match answer_call(deps.backend, &task.question, &state, None) {
                    Ok((answer, tokens, latency)) => {
                        final_answer = answer;
                        let applied = state.apply_step(step(
                            &state,
                            Action::respond(),
                            None,
                            Observation::none(),
                            tokens,
                            latency,
                        ));
                        if applied.is_ok() {
                            reason = match should_terminate(&state, ActionKind::Respond) {
                                TerminationCheck::Terminate(r) => r,
                                TerminationCheck::Continue => TerminationReason::Responded,
                            };
                        }
                        applied
                    }
                    Err(_) => {
                        completed = false;
                        break;
                    }
                }
            }
        };
        if applied.is_err() {
            reason = TerminationReason::FailureFallback;
            completed = false;
            break;
        }
    }
    if !completed && final_answer.is_empty() {
        // Failed or budget-stopped before the respond stage: no answer.
        final_answer = String::new();
    }
    finish(task, state, reason, final_answer, 0, config, started)
}

/// Retrieve while the control call's uncertainty exceeds `threshold_tau`
/// (strictly), then respond. Budget gates run at the top of every turn.
pub(crate) fn run_threshold(
    task: &EpisodeTask,
    deps: &Deps<'_>,
    config: &StrategyConfig,
    mut state: AgentState,
    started: Instant,
) -> EpisodeResult {
    let mut best_draft: Option<String> = None;
    let mut final_answer: Option<String> = None;
    let mut unattributed: u64 = 0;

    let reason = loop {
        if let Some(reason) = budget_exhausted(&state) {
            break reason;
        }
        let outcome = match control_call(deps.backend, &task.question, &state) {
            Ok(outcome) => outcome,
            Err(_) => break TerminationReason::FailureFallback,
        };
        state.record_parse_result(outcome.signals.parse_ok);
        if let Some(draft) = &outcome.draft {
            best_draft = Some(draft.clone());
        }

        if outcome.signals.uncertainty > config.threshold_tau {
            let query = outcome
                .arguments
                .retrieve
                .clone()
                .unwrap_or_else(|| task.question.clone());
            let observation = execute_retrieval(
                deps.index,
                &query,
                config.retrieval_k,
                ObservationSource::Retrieval,
            );
            let action = Action::retrieve(query).expect("query is non-empty");
            let retrieve_step = step(
                &state,
                action,
                Some(outcome.signals.clone()),
                observation,
                outcome.tokens,
                outcome.latency_seconds,
            );
            if state.apply_step(retrieve_step).is_err() {
                unattributed += outcome.tokens;
                break TerminationReason::FailureFallback;
            }
            match should_terminate(&state, ActionKind::Retrieve) {
                TerminationCheck::Continue => {}
                TerminationCheck::Terminate(reason) => break reason,
            }
        } else {
            match answer_call(deps.backend, &task.question, &state, best_draft.as_deref()) {
                Ok((answer, tokens, latency)) => {
                    final_answer = Some(answer);
                    let respond_step = step(
                        &state,
                        Action::respond(),
                        Some(outcome.signals.clone()),
                        Observation::none(),
                        outcome.tokens + tokens,
                        outcome.latency_seconds + latency,
                    );
                    if state.apply_step(respond_step).is_err() {
                        break TerminationReason::FailureFallback;
                    }
                    match should_terminate(&state, ActionKind::Respond) {
                        TerminationCheck::Terminate(reason) => break reason,
                        TerminationCheck::Continue => break TerminationReason::Responded,
                    }
                }
                Err(_) => {
                    unattributed += outcome.tokens;
                    break TerminationReason::FailureFallback;
                }
            }
        }
    };
    let answer = final_answer.or(best_draft).unwrap_or_default();
    finish(task, state, reason, answer, unattributed, config, started)
}

/// Minimal ReAct: the model emits Thought/Action lines; `Search[query]`
/// feeds a retrieval observation back, `Finish[answer]` ends the episode.
/// Unparseable actions count as parse failures (billed, not applied) and
/// the consecutive-failure cap closes the episode as failure_fallback.
pub(crate) fn run_react(
    task: &EpisodeTask,
    deps: &Deps<'_>,
    config: &StrategyConfig,
    mut state: AgentState,
    started: Instant,
) -> EpisodeResult {
    let step_cap = config.react_max_steps.min(state.budget().max_steps);
    let mut transcript: Vec<String> = Vec::new();
    let mut final_answer: Option<String> = None;
    let mut unattributed: u64 = 0;

    let reason = loop {
        if state.step_count >= step_cap {
            break TerminationReason::StepBudget;
        }
        if let Some(reason) = budget_exhausted(&state) {
            break reason;
        }
        let (text, tokens, latency) = match react_call(deps.backend, &task.question, &transcript) {
            Ok(reply) => reply,
            Err(_) => break TerminationReason::FailureFallback,
        };
        match parse_react_action(&text) {
            Some(ReactAction::Search(query)) => {
                state.record_parse_result(true);
                transcript.push(text.trim().to_string());
                let observation = execute_retrieval(
                    deps.index,
                    &query,
                    config.retrieval_k,
                    ObservationSource::Retrieval,
                );
                transcript.push(format!("Observation: {}", observation.content));
                let action = Action::retrieve(query).expect("search query is non-empty");
                if state
                    .apply_step(step(&state, action, None, observation, tokens, latency))
                    .is_err()
                {
                    unattributed += tokens;
                    break TerminationReason::FailureFallback;
                }
            }
            Some(ReactAction::Finish(answer)) => {
                state.record_parse_result(true);
                final_answer = Some(answer);
                if state
                    .apply_step(step(
                        &state,
                        Action::respond(),
                        None,
                        Observation::none(),
                        tokens,
                        latency,
                    ))
                    .is_err()
                {
                    unattributed += tokens;
                    break TerminationReason::FailureFallback;
                }
                match should_terminate(&state, ActionKind::Respond) {
                    TerminationCheck::Terminate(reason) => break reason,
                    TerminationCheck::Continue => break TerminationReason::Responded,
                }
            }
            None => {
                // Billed but never applied: the malformed turn leaves no
                // trajectory step, only a corrective observation line.
                state.record_parse_result(false);
                unattributed += tokens;
                transcript.push(
                    "Observation: invalid action; reply with Search[...] or Finish[...]".into(),
                );
            }
        }
    };
    let answer = final_answer.unwrap_or_default();
    finish(task, state, reason, answer, unattributed, config, started)
}
