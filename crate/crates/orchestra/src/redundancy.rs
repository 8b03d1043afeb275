//! Repeat-call detection for tool-backed actions.
//!
//! Tool queries are compared in a normalized token space. Two modes are
//! supported: `exact`, which only flags literal repeats (identical normalized
//! token sequences), and `semantic`, which scores near-duplicates by Jaccard
//! overlap of token sets and flags anything at or above a threshold.
//!
//! Only `retrieve` and `tool_call` actions are ever scored; every other kind
//! has redundancy 0 by definition. Comparisons are restricted to prior
//! actions of the same kind, so a reformulated `tool_call` is not penalised
//! for resembling an earlier plain `retrieve`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{Action, TrajectoryStep};

#[derive(Debug, Error)]
pub enum RedundancyError {
    #[error("semantic threshold must be in [0, 1], got {0}")]
    InvalidThreshold(f64),
}

/// How candidate tool queries are compared against prior ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RedundancyMode {
    /// Flag only literal repeats of a normalized token sequence.
    Exact,
    /// Flag near-duplicates whose token-set Jaccard similarity reaches
    /// `threshold`.
    Semantic {
        #[serde(default = "default_semantic_threshold")]
        threshold: f64,
    },
}

fn default_semantic_threshold() -> f64 {
    0.8
}

impl RedundancyMode {
    pub fn semantic_default() -> Self {
        RedundancyMode::Semantic { threshold: default_semantic_threshold() }
    }

    pub fn validate(&self) -> Result<(), RedundancyError> {
        if let RedundancyMode::Semantic { threshold } = self {
            if !threshold.is_finite() || !(0.0..=1.0).contains(threshold) {
                return Err(RedundancyError::InvalidThreshold(*threshold));
            }
        }
        Ok(())
    }

    /// Whether a redundancy score is high enough to flag a call as a repeat.
    pub fn flags(&self, score: f64) -> bool {
        match self {
            RedundancyMode::Exact => score >= 1.0,
            RedundancyMode::Semantic { threshold } => score >= *threshold,
        }
    }
}

impl Default for RedundancyMode {
    fn default() -> Self {
        RedundancyMode::Exact
    }
}

/// Lowercases, splits on runs of non-alphanumeric characters, and drops
/// empty fragments. Shared with the retriever so queries and documents live
/// in one token space.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|fragment| !fragment.is_empty())
        .map(str::to_string)
        .collect()
}

/// The set of distinct normalized tokens of `text`.
pub fn token_set(text: &str) -> HashSet<String> {
    normalize_tokens(text).into_iter().collect()
}

/// Jaccard similarity of two token sets. Two empty sets are identical (1.0);
/// one empty set against a non-empty one scores 0.0.
pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

/// Scores how much `candidate` repeats prior work, in `[0, 1]`.
///
/// Non-tool-backed candidates and candidates with no prior same-kind action
/// score 0.0. In exact mode the score is 1.0 iff some prior same-kind
/// argument normalizes to the identical token sequence; in semantic mode it
/// is the maximum Jaccard similarity over prior same-kind arguments.
pub fn redundancy_score(
    candidate: &Action,
    history: &[TrajectoryStep],
    mode: &RedundancyMode,
) -> f64 {
    if !candidate.kind().is_tool_backed() {
        return 0.0;
    }
    let argument = candidate.argument().unwrap_or("");
    let prior_arguments: Vec<&str> = history
        .iter()
        .filter(|step| step.action.kind() == candidate.kind())
        .filter_map(|step| step.action.argument())
        .collect();
    if prior_arguments.is_empty() {
        return 0.0;
    }
    match mode {
        RedundancyMode::Exact => {
            let candidate_tokens = normalize_tokens(argument);
            let repeat = prior_arguments
                .iter()
                .any(|prior| normalize_tokens(prior) == candidate_tokens);
            if repeat {
                1.0
            } else {
                0.0
            }
        }
        RedundancyMode::Semantic { .. } => {
            let candidate_tokens = token_set(argument);
            prior_arguments
                .iter()
                .map(|prior| jaccard(&candidate_tokens, &token_set(prior)))
                .fold(0.0, f64::max)
        }
    }
}

/// Counts the tool-backed steps of a finished trajectory that repeated an
/// earlier call, judging each step only against the steps before it.
pub fn count_redundant_calls(steps: &[TrajectoryStep], mode: &RedundancyMode) -> usize {
    steps
        .iter()
        .enumerate()
        .filter(|(i, step)| {
            step.action.kind().is_tool_backed()
                && mode.flags(redundancy_score(&step.action, &steps[..*i], mode))
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{ActionKind, Observation};
    use proptest::prelude::*;

    fn tool_step(index: usize, kind: ActionKind, argument: &str) -> TrajectoryStep {
        TrajectoryStep {
            index,
            action: Action::new(kind, Some(argument.to_string())).unwrap(),
            utility: None,
            signals: None,
            observation: Observation::none(),
            tokens_this_step: 0,
            latency_this_step_seconds: 0.0,
        }
    }

    #[test]
    fn normalize_tokens_examples() {
        assert_eq!(
            normalize_tokens("Who wrote Moby-Dick?"),
            vec!["who", "wrote", "moby", "dick"]
        );
        assert_eq!(normalize_tokens("  --  "), Vec::<String>::new());
        assert_eq!(normalize_tokens("A1_b2"), vec!["a1", "b2"]);
    }

    #[test]
    fn jaccard_edge_cases() {
        let empty = HashSet::new();
        let ab: HashSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let bc: HashSet<String> = ["b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(jaccard(&empty, &empty), 1.0);
        assert_eq!(jaccard(&empty, &ab), 0.0);
        assert_eq!(jaccard(&ab, &ab), 1.0);
        assert!((jaccard(&ab, &bc) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_mode_flags_case_and_punctuation_variants() {
        let history = vec![tool_step(0, ActionKind::Retrieve, "Who wrote Moby-Dick?")];
        let candidate = Action::retrieve("who wrote moby dick").unwrap();
        assert_eq!(redundancy_score(&candidate, &history, &RedundancyMode::Exact), 1.0);
        let different = Action::retrieve("who wrote moby dick sequel").unwrap();
        assert_eq!(redundancy_score(&different, &history, &RedundancyMode::Exact), 0.0);
    }

    #[test]
    fn exact_mode_requires_same_kind() {
        let history = vec![tool_step(0, ActionKind::Retrieve, "same query")];
        let candidate = Action::tool_call("same query").unwrap();
        assert_eq!(redundancy_score(&candidate, &history, &RedundancyMode::Exact), 0.0);
    }

    #[test]
    fn non_tool_actions_score_zero() {
        let history = vec![tool_step(0, ActionKind::Retrieve, "anything")];
        for action in [Action::respond(), Action::stop(), Action::verify(Some("anything".into()))] {
            assert_eq!(redundancy_score(&action, &history, &RedundancyMode::Exact), 0.0);
            assert_eq!(
                redundancy_score(&action, &history, &RedundancyMode::semantic_default()),
                0.0
            );
        }
    }

    #[test]
    fn semantic_mode_takes_max_over_history() {
        let history = vec![
            tool_step(0, ActionKind::Retrieve, "capital of france"),
            tool_step(1, ActionKind::Retrieve, "rivers in germany"),
        ];
        let candidate = Action::retrieve("capital city of france").unwrap();
        let score =
            redundancy_score(&candidate, &history, &RedundancyMode::semantic_default());
        // {capital, city, of, france} vs {capital, of, france}: 3/4.
        assert!((score - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_history_scores_zero() {
        let candidate = Action::retrieve("anything at all").unwrap();
        assert_eq!(redundancy_score(&candidate, &[], &RedundancyMode::Exact), 0.0);
        assert_eq!(
            redundancy_score(&candidate, &[], &RedundancyMode::semantic_default()),
            0.0
        );
    }

    #[test]
    fn count_redundant_calls_uses_prefix_only() {
        let steps = vec![
            tool_step(0, ActionKind::Retrieve, "capital of france"),
            tool_step(1, ActionKind::Retrieve, "Capital of France!"),
            tool_step(2, ActionKind::Retrieve, "rivers of europe"),
            tool_step(3, ActionKind::Retrieve, "capital of france"),
        ];
        assert_eq!(count_redundant_calls(&steps, &RedundancyMode::Exact), 2);
        assert_eq!(count_redundant_calls(&steps[..1], &RedundancyMode::Exact), 0);
    }

    #[test]
    fn semantic_threshold_validation() {
        assert!(RedundancyMode::Semantic { threshold: 1.5 }.validate().is_err());
        assert!(RedundancyMode::Semantic { threshold: f64::NAN }.validate().is_err());
        assert!(RedundancyMode::Semantic { threshold: 0.8 }.validate().is_ok());
        assert!(RedundancyMode::Exact.validate().is_ok());
    }

    #[test]
    fn mode_deserializes_from_tagged_form() {
        let exact: RedundancyMode = serde_json::from_str(r#"{"mode":"exact"}"#).unwrap();
        assert_eq!(exact, RedundancyMode::Exact);
        let semantic: RedundancyMode = serde_json::from_str(r#"{"mode":"semantic"}"#).unwrap();
        assert_eq!(semantic, RedundancyMode::semantic_default());
        let custom: RedundancyMode =
            serde_json::from_str(r#"{"mode":"semantic","threshold":0.6}"#).unwrap();
        assert_eq!(custom, RedundancyMode::Semantic { threshold: 0.6 });
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(a in proptest::collection::hash_set("[a-e]{1,3}", 0..8),
                                            b in proptest::collection::hash_set("[a-e]{1,3}", 0..8)) {
            let left = jaccard(&a, &b);
            let right = jaccard(&b, &a);
            prop_assert!((left - right).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&left));
        }

        #[test]
        fn normalize_tokens_is_idempotent(text in ".{0,60}") {
            let once = normalize_tokens(&text);
            let twice = normalize_tokens(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn redundancy_score_is_bounded(query in "[a-f ]{0,30}", prior in "[a-f ]{0,30}") {
            let non_empty = |s: String| if s.trim().is_empty() { "q".to_string() } else { s };
            let history = vec![tool_step(0, ActionKind::Retrieve, &non_empty(prior))];
            let candidate = Action::retrieve(non_empty(query)).unwrap();
            for mode in [RedundancyMode::Exact, RedundancyMode::semantic_default()] {
                let score = redundancy_score(&candidate, &history, &mode);
                prop_assert!((0.0..=1.0).contains(&score));
            }
        }
    }
}
