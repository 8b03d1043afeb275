//! Per-action utility scoring, cost models, and argmax selection.
//!
//! Each candidate action is scored as
//!
//! ```text
//! U = gain - w_cost * cost - w_uncertainty * uncertainty - w_redundancy * redundancy
//! ```
//!
//! with three interchangeable cost models (`step`, `token`, `latency`) and an
//! [`AblationMask`] that can neutralise individual terms: masking gain
//! replaces it with the constant [`NEUTRAL_GAIN`], masking uncertainty or
//! redundancy zeroes that term, and masking stop removes `stop` from the
//! candidate set. The emitted [`UtilityBreakdown`] stores the *raw* inputs so
//! a logged decision can be recomputed exactly from the run configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{ActionKind, ActionValues, AgentState, Budget};

/// Gain substituted for every candidate when the gain term is masked off.
pub const NEUTRAL_GAIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("non-finite value for {field}")]
    NonFinite { field: &'static str },
    #[error("weights must be finite and non-negative")]
    InvalidWeights,
    #[error("no candidate actions to select from")]
    NoCandidates,
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
}

/// Weights on the three penalty terms of the utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityWeights {
    /// Weight on the cost term (λ1).
    #[serde(alias = "lambda1")]
    pub cost: f64,
    /// Weight on the uncertainty term (λ2).
    #[serde(alias = "lambda2")]
    pub uncertainty: f64,
    /// Weight on the redundancy term (λ3).
    #[serde(alias = "lambda3")]
    pub redundancy: f64,
}

impl UtilityWeights {
    pub fn new(cost: f64, uncertainty: f64, redundancy: f64) -> Result<Self, UtilityError> {
        let weights = UtilityWeights { cost, uncertainty, redundancy };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        let all = [self.cost, self.uncertainty, self.redundancy];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(UtilityError::InvalidWeights);
        }
        Ok(())
    }
}

impl Default for UtilityWeights {
    fn default() -> Self {
        UtilityWeights { cost: 1.0, uncertainty: 1.0, redundancy: 1.0 }
    }
}

/// Which cost model feeds the utility's cost term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Step,
    Token,
    Latency,
}

impl Default for CostMode {
    fn default() -> Self {
        CostMode::Step
    }
}

/// Switches that turn individual utility terms (or the stop action) off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationMask {
    pub use_gain: bool,
    pub use_uncertainty: bool,
    pub use_redundancy: bool,
    pub allow_stop: bool,
}

impl AblationMask {
    pub fn full() -> Self {
        AblationMask::default()
    }

    pub fn without_gain() -> Self {
        AblationMask { use_gain: false, ..AblationMask::default() }
    }

    pub fn without_uncertainty() -> Self {
        AblationMask { use_uncertainty: false, ..AblationMask::default() }
    }

    pub fn without_redundancy() -> Self {
        AblationMask { use_redundancy: false, ..AblationMask::default() }
    }

    pub fn without_stop() -> Self {
        AblationMask { allow_stop: false, ..AblationMask::default() }
    }
}

impl Default for AblationMask {
    fn default() -> Self {
        AblationMask { use_gain: true, use_uncertainty: true, use_redundancy: true, allow_stop: true }
    }
}

/// The audited record of one candidate's utility computation.
///
/// `gain`, `cost`, `uncertainty`, and `redundancy` hold the raw inputs before
/// masking or weighting; `total` holds the masked, weighted score actually
/// used for selection. Given the run's weights and mask, `total` is exactly
/// recomputable via [`UtilityBreakdown::recompute_total`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub action_kind: ActionKind,
    pub gain: f64,
    pub cost: f64,
    pub uncertainty: f64,
    pub redundancy: f64,
    pub total: f64,
}

impl UtilityBreakdown {
    /// Re-applies mask and weights to the stored raw components, reproducing
    /// `total` bit-for-bit.
    pub fn recompute_total(&self, weights: &UtilityWeights, mask: &AblationMask) -> f64 {
        masked_total(self.gain, self.cost, self.uncertainty, self.redundancy, weights, mask)
    }
}

fn masked_total(
    gain: f64,
    cost: f64,
    uncertainty: f64,
    redundancy: f64,
    weights: &UtilityWeights,
    mask: &AblationMask,
) -> f64 {
    let gain_term = if mask.use_gain { gain } else { NEUTRAL_GAIN };
    let cost_term = weights.cost * cost;
    let uncertainty_term =
        if mask.use_uncertainty { weights.uncertainty * uncertainty } else { 0.0 };
    let redundancy_term =
        if mask.use_redundancy { weights.redundancy * redundancy } else { 0.0 };
    gain_term - cost_term - uncertainty_term - redundancy_term
}

/// Scores one candidate action.
///
/// `signals` supplies the per-action gain and the shared uncertainty; `cost`
/// and `redundancy` come from the cost model and redundancy scorer. All
/// inputs must be finite.
pub fn compute_utility(
    kind: ActionKind,
    signals: &crate::backend::SignalEstimate,
    cost: f64,
    redundancy: f64,
    weights: &UtilityWeights,
    mask: &AblationMask,
) -> Result<UtilityBreakdown, UtilityError> {
    weights.validate()?;
    let gain = signals.per_action_gain.get(kind);
    let uncertainty = signals.uncertainty;
    if !gain.is_finite() {
        return Err(UtilityError::NonFinite { field: "gain" });
    }
    if !uncertainty.is_finite() {
        return Err(UtilityError::NonFinite { field: "uncertainty" });
    }
    if !cost.is_finite() {
        return Err(UtilityError::NonFinite { field: "cost" });
    }
    if !redundancy.is_finite() {
        return Err(UtilityError::NonFinite { field: "redundancy" });
    }
    let total = masked_total(gain, cost, uncertainty, redundancy, weights, mask);
    Ok(UtilityBreakdown { action_kind: kind, gain, cost, uncertainty, redundancy, total })
}

/// Picks the candidate with the highest total.
///
/// `stop` candidates are discarded when the mask forbids stopping. Ties break
/// in canonical kind order (`respond` first, `stop` last).
pub fn select_action(
    candidates: &[UtilityBreakdown],
    mask: &AblationMask,
) -> Result<ActionKind, UtilityError> {
    let mut best: Option<&UtilityBreakdown> = None;
    for candidate in candidates {
        if !mask.allow_stop && candidate.action_kind == ActionKind::Stop {
            continue;
        }
        if !candidate.total.is_finite() {
            return Err(UtilityError::NonFinite { field: "total" });
        }
        best = match best {
            None => Some(candidate),
            Some(current)
                if candidate.total > current.total
                    || (candidate.total == current.total
                        && candidate.action_kind < current.action_kind) =>
            {
                Some(candidate)
            }
            Some(current) => Some(current),
        };
    }
    best.map(|b| b.action_kind).ok_or(UtilityError::NoCandidates)
}

// ─── Cost models ────────────────────────────────────────────────────────────

/// Parameters shared by the three cost models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModelConfig {
    /// Per-kind base for the step-cost model, each in `[0, 1]`.
    pub base_step_cost: ActionValues,
    /// Denominator turning a token estimate into a `[0, 1]` cost.
    pub token_normalizer: u64,
    /// Per-kind prior token estimate used before any observation of a kind.
    pub token_prior: ActionValues,
    /// Denominator turning a latency estimate into a `[0, 1]` cost.
    pub latency_normalizer_seconds: f64,
    /// EWMA smoothing factor in `(0, 1]` for the latency model.
    pub latency_ewma_alpha: f64,
    /// Per-kind prior latency (seconds) seeding the EWMA.
    pub latency_prior_seconds: ActionValues,
}

impl CostModelConfig {
    pub fn validate(&self) -> Result<(), UtilityError> {
        for kind in ActionKind::ALL {
            let base = self.base_step_cost.get(kind);
            if !base.is_finite() || !(0.0..=1.0).contains(&base) {
                return Err(UtilityError::InvalidCostModel(format!(
                    "base_step_cost.{kind} must be in [0, 1]"
                )));
            }
            let prior = self.token_prior.get(kind);
            if !prior.is_finite() || prior < 0.0 {
                return Err(UtilityError::InvalidCostModel(format!(
                    "token_prior.{kind} must be non-negative"
                )));
            }
            let latency_prior = self.latency_prior_seconds.get(kind);
            if !latency_prior.is_finite() || latency_prior < 0.0 {
                return Err(UtilityError::InvalidCostModel(format!(
                    "latency_prior_seconds.{kind} must be non-negative"
                )));
            }
        }
        if self.token_normalizer == 0 {
            return Err(UtilityError::InvalidCostModel("token_normalizer must be positive".into()));
        }
        if !self.latency_normalizer_seconds.is_finite() || self.latency_normalizer_seconds <= 0.0 {
            return Err(UtilityError::InvalidCostModel(
                "latency_normalizer_seconds must be positive".into(),
            ));
        }
        if !self.latency_ewma_alpha.is_finite()
            || !(self.latency_ewma_alpha > 0.0 && self.latency_ewma_alpha <= 1.0)
        {
            return Err(UtilityError::InvalidCostModel(
                "latency_ewma_alpha must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            base_step_cost: ActionValues {
                respond: 0.2,
                retrieve: 0.5,
                tool_call: 0.6,
                verify: 0.4,
                stop: 0.0,
            },
            token_normalizer: 1000,
            token_prior: ActionValues {
                respond: 150.0,
                retrieve: 250.0,
                tool_call: 250.0,
                verify: 200.0,
                stop: 0.0,
            },
            latency_normalizer_seconds: 2.0,
            latency_ewma_alpha: 0.5,
            latency_prior_seconds: ActionValues {
                respond: 0.4,
                retrieve: 0.6,
                tool_call: 0.6,
                verify: 0.5,
                stop: 0.0,
            },
        }
    }
}

fn clip01(value: f64) -> f64 {
    value.clamp(0.0, 1.0)
}

/// Step-cost model: the per-kind base grows mildly with trajectory depth,
/// `base * (1 + t / T_max) / 2`, clipped to `[0, 1]`.
pub fn step_cost_of(
    kind: ActionKind,
    state: &AgentState,
    config: &CostModelConfig,
    budget: &Budget,
) -> f64 {
    let depth_factor = (1.0 + state.step_count as f64 / budget.max_steps as f64) / 2.0;
    clip01(config.base_step_cost.get(kind) * depth_factor)
}

/// Token-cost model: the running mean of observed step tokens for this kind
/// (falling back to the configured prior), divided by the normalizer.
pub fn token_cost_of(kind: ActionKind, state: &AgentState, config: &CostModelConfig) -> f64 {
    let observed: Vec<u64> = state
        .history()
        .iter()
        .filter(|step| step.action.kind() == kind)
        .map(|step| step.tokens_this_step)
        .collect();
    let estimate = if observed.is_empty() {
        config.token_prior.get(kind)
    } else {
        observed.iter().sum::<u64>() as f64 / observed.len() as f64
    };
    clip01(estimate / config.token_normalizer as f64)
}

/// Latency-cost model: an EWMA over observed step latencies for this kind,
/// seeded with the configured prior, divided by the normalizer.
pub fn latency_cost_of(kind: ActionKind, state: &AgentState, config: &CostModelConfig) -> f64 {
    let mut ewma = config.latency_prior_seconds.get(kind);
    for step in state.history().iter().filter(|step| step.action.kind() == kind) {
        ewma = config.latency_ewma_alpha * step.latency_this_step_seconds
            + (1.0 - config.latency_ewma_alpha) * ewma;
    }
    clip01(ewma / config.latency_normalizer_seconds)
}

/// Dispatches to the cost model selected by `mode`.
pub fn cost_of(
    mode: CostMode,
    kind: ActionKind,
    state: &AgentState,
    config: &CostModelConfig,
    budget: &Budget,
) -> f64 {
    match mode {
        CostMode::Step => step_cost_of(kind, state, config, budget),
        CostMode::Token => token_cost_of(kind, state, config),
        CostMode::Latency => latency_cost_of(kind, state, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::SignalEstimate;
    use crate::state::{Action, Observation, TrajectoryStep};
    use proptest::prelude::*;

    fn signals(gain: f64, uncertainty: f64) -> SignalEstimate {
        SignalEstimate {
            per_action_gain: ActionValues::uniform(gain),
            uncertainty,
            parse_ok: true,
        }
    }

    fn breakdown(kind: ActionKind, total: f64) -> UtilityBreakdown {
        UtilityBreakdown {
            action_kind: kind,
            gain: 0.0,
            cost: 0.0,
            uncertainty: 0.0,
            redundancy: 0.0,
            total,
        }
    }

    fn state_with_steps(steps: Vec<(ActionKind, u64, f64)>) -> AgentState {
        let mut state = AgentState::new("q", Budget::default()).unwrap();
        for (i, (kind, tokens, latency)) in steps.into_iter().enumerate() {
            let action = match kind {
                ActionKind::Retrieve => Action::retrieve(format!("query {i}")).unwrap(),
                ActionKind::ToolCall => Action::tool_call(format!("query {i}")).unwrap(),
                ActionKind::Verify => Action::verify(None),
                ActionKind::Respond => Action::respond(),
                ActionKind::Stop => Action::stop(),
            };
            state
                .apply_step(TrajectoryStep {
                    index: i,
                    action,
                    utility: None,
                    signals: None,
                    observation: Observation::none(),
                    tokens_this_step: tokens,
                    latency_this_step_seconds: latency,
                })
                .unwrap();
        }
        state
    }

    #[test]
    fn utility_direct_substitution() {
        let weights = UtilityWeights::default();
        let mask = AblationMask::full();
        let mut est = signals(0.8, 0.2);
        est.per_action_gain.set(ActionKind::Retrieve, 0.8);
        let b = compute_utility(ActionKind::Retrieve, &est, 0.3, 0.0, &weights, &mask).unwrap();
        assert!((b.total - 0.3).abs() < 1e-12);
        assert_eq!(b.gain, 0.8);
        assert_eq!(b.cost, 0.3);
    }

    #[test]
    fn zero_weights_leave_only_gain() {
        let weights = UtilityWeights::new(0.0, 0.0, 0.0).unwrap();
        let b = compute_utility(
            ActionKind::Verify,
            &signals(0.7, 0.9),
            1.0,
            1.0,
            &weights,
            &AblationMask::full(),
        )
        .unwrap();
        assert_eq!(b.total, 0.7);
    }

    #[test]
    fn half_weights_substitution() {
        let weights = UtilityWeights::new(0.5, 0.5, 0.5).unwrap();
        let b = compute_utility(
            ActionKind::Respond,
            &signals(0.5, 0.5),
            0.5,
            0.5,
            &weights,
            &AblationMask::full(),
        )
        .unwrap();
        assert!((b.total - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn masked_gain_uses_neutral_constant_but_logs_raw() {
        let b = compute_utility(
            ActionKind::Retrieve,
            &signals(0.9, 0.0),
            0.0,
            0.0,
            &UtilityWeights::default(),
            &AblationMask::without_gain(),
        )
        .unwrap();
        assert_eq!(b.gain, 0.9);
        assert_eq!(b.total, NEUTRAL_GAIN);
    }

    #[test]
    fn masked_terms_contribute_exactly_zero() {
        let weights = UtilityWeights::default();
        let mask = AblationMask {
            use_gain: true,
            use_uncertainty: false,
            use_redundancy: false,
            allow_stop: true,
        };
        let b = compute_utility(ActionKind::Retrieve, &signals(0.6, 0.9), 0.1, 0.8, &weights, &mask)
            .unwrap();
        assert!((b.total - 0.5).abs() < 1e-12);
        // Raw values still logged for the audit trail.
        assert_eq!(b.uncertainty, 0.9);
        assert_eq!(b.redundancy, 0.8);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let weights = UtilityWeights::default();
        let mask = AblationMask::full();
        let err =
            compute_utility(ActionKind::Respond, &signals(f64::NAN, 0.2), 0.1, 0.0, &weights, &mask);
        assert!(matches!(err, Err(UtilityError::NonFinite { field: "gain" })));
        let err = compute_utility(
            ActionKind::Respond,
            &signals(0.5, 0.2),
            f64::INFINITY,
            0.0,
            &weights,
            &mask,
        );
        assert!(matches!(err, Err(UtilityError::NonFinite { field: "cost" })));
    }

    #[test]
    fn weights_validation() {
        assert!(UtilityWeights::new(-0.1, 1.0, 1.0).is_err());
        assert!(UtilityWeights::new(1.0, f64::NAN, 1.0).is_err());
        assert!(UtilityWeights::new(0.0, 0.0, 2.5).is_ok());
    }

    #[test]
    fn recompute_total_is_exact() {
        let weights = UtilityWeights::new(0.7, 1.3, 0.2).unwrap();
        let mask = AblationMask::without_uncertainty();
        let b = compute_utility(ActionKind::ToolCall, &signals(0.41, 0.77), 0.23, 0.11, &weights, &mask)
            .unwrap();
        assert_eq!(b.total, b.recompute_total(&weights, &mask));
    }

    #[test]
    fn select_action_strict_argmax() {
        let candidates = vec![
            breakdown(ActionKind::Respond, 0.1),
            breakdown(ActionKind::Retrieve, 0.6),
            breakdown(ActionKind::Stop, 0.0),
        ];
        assert_eq!(
            select_action(&candidates, &AblationMask::full()).unwrap(),
            ActionKind::Retrieve
        );
    }

    #[test]
    fn select_action_canonical_tie_break() {
        let candidates: Vec<_> =
            ActionKind::ALL.iter().map(|&k| breakdown(k, 0.25)).collect();
        assert_eq!(
            select_action(&candidates, &AblationMask::full()).unwrap(),
            ActionKind::Respond
        );
    }

    #[test]
    fn select_action_excludes_stop_when_masked() {
        let mut candidates: Vec<_> =
            ActionKind::ALL.iter().map(|&k| breakdown(k, 0.1)).collect();
        candidates[4].total = 0.9; // stop highest
        candidates[3].total = 0.5; // verify second
        assert_eq!(
            select_action(&candidates, &AblationMask::without_stop()).unwrap(),
            ActionKind::Verify
        );
        assert_eq!(
            select_action(&candidates, &AblationMask::full()).unwrap(),
            ActionKind::Stop
        );
    }

    #[test]
    fn select_action_empty_is_error() {
        assert!(matches!(
            select_action(&[], &AblationMask::full()),
            Err(UtilityError::NoCandidates)
        ));
        let only_stop = vec![breakdown(ActionKind::Stop, 1.0)];
        assert!(matches!(
            select_action(&only_stop, &AblationMask::without_stop()),
            Err(UtilityError::NoCandidates)
        ));
    }

    #[test]
    fn step_cost_examples() {
        let config = CostModelConfig::default();
        let budget = Budget::default();
        let state = state_with_steps(vec![]);
        assert!((step_cost_of(ActionKind::Retrieve, &state, &config, &budget) - 0.25).abs() < 1e-12);
        assert_eq!(step_cost_of(ActionKind::Stop, &state, &config, &budget), 0.0);
        let full = state_with_steps(vec![(ActionKind::Retrieve, 0, 0.0); 8]);
        assert!((step_cost_of(ActionKind::Retrieve, &full, &config, &budget) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn token_cost_examples() {
        let mut config = CostModelConfig::default();
        config.token_prior.set(ActionKind::Retrieve, 200.0);
        let empty = state_with_steps(vec![]);
        assert!((token_cost_of(ActionKind::Retrieve, &empty, &config) - 0.2).abs() < 1e-12);
        let observed = state_with_steps(vec![
            (ActionKind::Retrieve, 300, 0.0),
            (ActionKind::Respond, 999, 0.0),
            (ActionKind::Retrieve, 500, 0.0),
        ]);
        assert!((token_cost_of(ActionKind::Retrieve, &observed, &config) - 0.4).abs() < 1e-12);
        let huge = state_with_steps(vec![(ActionKind::Retrieve, 5000, 0.0)]);
        assert_eq!(token_cost_of(ActionKind::Retrieve, &huge, &config), 1.0);
    }

    #[test]
    fn latency_cost_examples() {
        let mut config = CostModelConfig::default();
        config.latency_prior_seconds.set(ActionKind::Verify, 0.5);
        let empty = state_with_steps(vec![]);
        assert!((latency_cost_of(ActionKind::Verify, &empty, &config) - 0.25).abs() < 1e-12);

        let mut full_update = CostModelConfig::default();
        full_update.latency_ewma_alpha = 1.0;
        let observed = state_with_steps(vec![(ActionKind::Retrieve, 0, 2.0)]);
        assert_eq!(latency_cost_of(ActionKind::Retrieve, &observed, &full_update), 1.0);

        let slow = state_with_steps(vec![(ActionKind::Retrieve, 0, 50.0)]);
        assert_eq!(latency_cost_of(ActionKind::Retrieve, &slow, &config), 1.0);
    }

    #[test]
    fn cost_model_validation() {
        let mut config = CostModelConfig::default();
        assert!(config.validate().is_ok());
        config.base_step_cost.set(ActionKind::Respond, 1.5);
        assert!(config.validate().is_err());
        let mut config = CostModelConfig::default();
        config.latency_ewma_alpha = 0.0;
        assert!(config.validate().is_err());
        let mut config = CostModelConfig::default();
        config.token_normalizer = 0;
        assert!(config.validate().is_err());
    }

    proptest! {
        #[test]
        fn masked_redundancy_is_neutral(red_a in 0.0f64..=1.0, red_b in 0.0f64..=1.0,
                                        gain in 0.0f64..=1.0, unc in 0.0f64..=1.0,
                                        cost in 0.0f64..=1.0) {
            let weights = UtilityWeights::default();
            let mask = AblationMask::without_redundancy();
            let est = signals(gain, unc);
            let a = compute_utility(ActionKind::Retrieve, &est, cost, red_a, &weights, &mask).unwrap();
            let b = compute_utility(ActionKind::Retrieve, &est, cost, red_b, &weights, &mask).unwrap();
            prop_assert_eq!(a.total, b.total);
        }

        #[test]
        fn argmax_scale_invariance(totals in proptest::collection::vec(-1.0f64..=1.0, 5),
                                   scale in 0.001f64..=100.0) {
            let mask = AblationMask::full();
            let base: Vec<_> = ActionKind::ALL.iter().zip(&totals)
                .map(|(&k, &t)| breakdown(k, t)).collect();
            let scaled: Vec<_> = ActionKind::ALL.iter().zip(&totals)
                .map(|(&k, &t)| breakdown(k, t * scale)).collect();
            prop_assert_eq!(select_action(&base, &mask).unwrap(),
                            select_action(&scaled, &mask).unwrap());
        }

        #[test]
        fn gain_monotonicity(totals in proptest::collection::vec(-1.0f64..=1.0, 5),
                             boost in 0.0f64..=1.0) {
            let mask = AblationMask::full();
            let base: Vec<_> = ActionKind::ALL.iter().zip(&totals)
                .map(|(&k, &t)| breakdown(k, t)).collect();
            let winner = select_action(&base, &mask).unwrap();
            // Raising only the winner's total never dethrones it.
            let boosted: Vec<_> = base.iter().map(|c| {
                let mut c = c.clone();
                if c.action_kind == winner { c.total += boost; }
                c
            }).collect();
            prop_assert_eq!(select_action(&boosted, &mask).unwrap(), winner);
        }

        #[test]
        fn step_cost_monotone_and_bounded(steps_a in 0usize..8, steps_b in 0usize..8,
                                          base in 0.0f64..=1.0) {
            let mut config = CostModelConfig::default();
            config.base_step_cost = ActionValues::uniform(base);
            let budget = Budget::default();
            let (lo, hi) = if steps_a <= steps_b { (steps_a, steps_b) } else { (steps_b, steps_a) };
            let state_lo = state_with_steps(vec![(ActionKind::Verify, 0, 0.0); lo]);
            let state_hi = state_with_steps(vec![(ActionKind::Verify, 0, 0.0); hi]);
            let cost_lo = step_cost_of(ActionKind::Retrieve, &state_lo, &config, &budget);
            let cost_hi = step_cost_of(ActionKind::Retrieve, &state_hi, &config, &budget);
            prop_assert!(cost_lo <= cost_hi);
            prop_assert!((0.0..=1.0).contains(&cost_lo));
        }

        #[test]
        fn all_cost_modes_bounded(tokens in proptest::collection::vec(0u64..20_000, 0..6),
                                  latencies in proptest::collection::vec(0.0f64..30.0, 0..6)) {
            let config = CostModelConfig::default();
            let budget = Budget::default();
            let steps: Vec<_> = tokens.iter().zip(latencies.iter())
                .map(|(&t, &l)| (ActionKind::Retrieve, t, l)).collect();
            let state = state_with_steps(steps);
            for mode in [CostMode::Step, CostMode::Token, CostMode::Latency] {
                for kind in ActionKind::ALL {
                    let cost = cost_of(mode, kind, &state, &config, &budget);
                    prop_assert!((0.0..=1.0).contains(&cost), "mode {:?} kind {:?} cost {}", mode, kind, cost);
                }
            }
        }
    }
}
