//! Experiment grids: named method sets with per-row configuration deltas.
//!
//! Every grid starts from the run's base [`StrategyConfig`] and overrides
//! only what the row pins, so flags like budgets or retrieval depth set in
//! the base configuration apply uniformly across a grid. Row names are part
//! of the output contract and are kept byte-stable — including the spelling
//! difference between `policy (step-cost)` in the main and cost grids and
//! `policy (step_cost)` in the redundancy grid — because downstream
//! consumers match rows by name.

use serde::{Deserialize, Serialize};

use crate::orchestrator::{Strategy, StrategyConfig};
use crate::redundancy::RedundancyMode;
use crate::utility::{AblationMask, CostMode};

/// The named experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridName {
    /// All seven strategies head-to-head.
    Main,
    /// Step- vs token- vs latency-cost policies against key baselines.
    Cost,
    /// The three fixed workflows with their tool-call counts.
    Fairness,
    /// Exact vs semantic redundancy control for the policy.
    Redundancy,
    /// Policy-only run feeding the signal analysis (correlations, buckets).
    Signals,
    /// Utility-term ablations of the policy.
    Ablation,
    /// Policy swept across max_steps values.
    Depth,
}

impl GridName {
    pub const ALL: [GridName; 7] = [
        GridName::Main,
        GridName::Cost,
        GridName::Fairness,
        GridName::Redundancy,
        GridName::Signals,
        GridName::Ablation,
        GridName::Depth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GridName::Main => "main",
            GridName::Cost => "cost",
            GridName::Fairness => "fairness",
            GridName::Redundancy => "redundancy",
            GridName::Signals => "signals",
            GridName::Ablation => "ablation",
            GridName::Depth => "depth",
        }
    }
}

impl std::str::FromStr for GridName {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        GridName::ALL
            .into_iter()
            .find(|grid| grid.as_str() == text)
            .ok_or_else(|| {
                format!(
                    "unknown grid {text:?}; expected one of: {}",
                    GridName::ALL.map(GridName::as_str).join(", ")
                )
            })
    }
}

impl std::fmt::Display for GridName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One grid row: a display name and the full configuration it runs under.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub name: String,
    pub config: StrategyConfig,
}

fn spec(name: &str, config: StrategyConfig) -> MethodSpec {
    MethodSpec { name: name.to_string(), config }
}

fn with_strategy(base: &StrategyConfig, strategy: Strategy) -> StrategyConfig {
    StrategyConfig { strategy, ..base.clone() }
}

fn policy_with_cost(base: &StrategyConfig, cost_mode: CostMode) -> StrategyConfig {
    StrategyConfig { strategy: Strategy::Policy, cost_mode, ..base.clone() }
}

fn policy_with_mask(base: &StrategyConfig, mask: AblationMask) -> StrategyConfig {
    StrategyConfig { strategy: Strategy::Policy, mask, ..base.clone() }
}

/// Expands a grid into its ordered method rows.
///
/// `depth_steps` is only consulted by the depth grid.
pub fn method_specs(
    grid: GridName,
    base: &StrategyConfig,
    depth_steps: &[usize],
) -> Vec<MethodSpec> {
    match grid {
        GridName::Main => vec![
            spec("direct", with_strategy(base, Strategy::Direct)),
            spec("workflow (minimal)", with_strategy(base, Strategy::WorkflowMinimal)),
            spec("workflow-search-twice", with_strategy(base, Strategy::WorkflowSearchTwice)),
            spec("workflow-search-verify", with_strategy(base, Strategy::WorkflowSearchVerify)),
            spec("threshold", with_strategy(base, Strategy::Threshold)),
            spec("react", with_strategy(base, Strategy::React)),
            spec("policy (step-cost)", policy_with_cost(base, CostMode::Step)),
        ],
        GridName::Cost => vec![
            spec("workflow (minimal)", with_strategy(base, Strategy::WorkflowMinimal)),
            spec("react", with_strategy(base, Strategy::React)),
            spec("threshold", with_strategy(base, Strategy::Threshold)),
            spec("policy (step-cost)", policy_with_cost(base, CostMode::Step)),
            spec("policy (token-cost)", policy_with_cost(base, CostMode::Token)),
            spec("policy (latency-cost)", policy_with_cost(base, CostMode::Latency)),
        ],
        GridName::Fairness => vec![
            spec("workflow (minimal)", with_strategy(base, Strategy::WorkflowMinimal)),
            spec("workflow-search-twice", with_strategy(base, Strategy::WorkflowSearchTwice)),
            spec("workflow-search-verify", with_strategy(base, Strategy::WorkflowSearchVerify)),
        ],
        GridName::Redundancy => vec![
            spec("policy (step_cost)", {
                let mut config = policy_with_cost(base, CostMode::Step);
                config.redundancy_mode = RedundancyMode::Exact;
                config
            }),
            spec("policy (semantic redundancy)", {
                let mut config = policy_with_cost(base, CostMode::Step);
                config.redundancy_mode = RedundancyMode::semantic_default();
                config
            }),
        ],
        GridName::Signals => vec![spec(
            "policy (step-cost)",
            policy_with_cost(base, CostMode::Step),
        )],
        GridName::Ablation => vec![
            spec("full policy", policy_with_mask(base, AblationMask::full())),
            spec("-expected-gain", policy_with_mask(base, AblationMask::without_gain())),
            spec("-uncertainty", policy_with_mask(base, AblationMask::without_uncertainty())),
            spec("-redundancy", policy_with_mask(base, AblationMask::without_redundancy())),
            spec("-stop", policy_with_mask(base, AblationMask::without_stop())),
        ],
        GridName::Depth => depth_steps
            .iter()
            .map(|&max_steps| {
                let mut config = policy_with_cost(base, base.cost_mode);
                config.budget.max_steps = max_steps;
                spec(&format!("policy (max_steps={max_steps})"), config)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_names_round_trip() {
        for grid in GridName::ALL {
            let parsed: GridName = grid.as_str().parse().unwrap();
            assert_eq!(parsed, grid);
            let json = serde_json::to_string(&grid).unwrap();
            assert_eq!(json, format!("\"{}\"", grid.as_str()));
        }
        assert!("nonsense".parse::<GridName>().is_err());
    }

    #[test]
    fn main_grid_rows_match_result_table() {
        let rows = method_specs(GridName::Main, &StrategyConfig::default(), &[]);
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "direct",
                "workflow (minimal)",
                "workflow-search-twice",
                "workflow-search-verify",
                "threshold",
                "react",
                "policy (step-cost)",
            ]
        );
    }

    #[test]
    fn ablation_grid_emits_exactly_five_masks() {
        let rows = method_specs(GridName::Ablation, &StrategyConfig::default(), &[]);
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["full policy", "-expected-gain", "-uncertainty", "-redundancy", "-stop"]
        );
        assert!(rows.iter().all(|r| r.config.strategy == Strategy::Policy));
        assert!(!rows[1].config.mask.use_gain);
        assert!(!rows[2].config.mask.use_uncertainty);
        assert!(!rows[3].config.mask.use_redundancy);
        assert!(!rows[4].config.mask.allow_stop);
    }

    #[test]
    fn cost_grid_sweeps_all_three_cost_modes() {
        let rows = method_specs(GridName::Cost, &StrategyConfig::default(), &[]);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3].config.cost_mode, CostMode::Step);
        assert_eq!(rows[4].config.cost_mode, CostMode::Token);
        assert_eq!(rows[5].config.cost_mode, CostMode::Latency);
    }

    #[test]
    fn redundancy_grid_spells_rows_like_its_table() {
        let rows = method_specs(GridName::Redundancy, &StrategyConfig::default(), &[]);
        assert_eq!(rows[0].name, "policy (step_cost)");
        assert_eq!(rows[1].name, "policy (semantic redundancy)");
        assert_eq!(rows[0].config.redundancy_mode, RedundancyMode::Exact);
        assert!(matches!(rows[1].config.redundancy_mode, RedundancyMode::Semantic { .. }));
    }

    #[test]
    fn depth_grid_sweeps_max_steps() {
        let rows = method_specs(GridName::Depth, &StrategyConfig::default(), &[1, 2, 4]);
        let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["policy (max_steps=1)", "policy (max_steps=2)", "policy (max_steps=4)"]
        );
        assert_eq!(rows[0].config.budget.max_steps, 1);
        assert_eq!(rows[2].config.budget.max_steps, 4);
    }

    #[test]
    fn base_overrides_flow_into_rows() {
        let base = StrategyConfig { retrieval_k: 5, ..StrategyConfig::default() };
        let rows = method_specs(GridName::Main, &base, &[]);
        assert!(rows.iter().all(|r| r.config.retrieval_k == 5));
    }
}
