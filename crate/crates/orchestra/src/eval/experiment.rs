//! Experiment execution: runs every method row of a grid over the same
//! sampled examples and assembles the [`RunReport`].
//!
//! Episodes are independent, so batches fan out across a thread pool when
//! the `parallel` feature is enabled and more than one job is requested;
//! results come back in input order either way, and a scripted backend gives
//! every episode its own replay cursor, so the parallel and sequential paths
//! produce identical reports (up to wall-clock fields).

use crate::backend::BackendSource;
use crate::metrics::{aggregate, bucket_continue_rate, pearson};
use crate::orchestrator::{run_episode, Deps, EpisodeTask, Strategy, StrategyConfig};
use crate::retriever::Bm25Index;
use crate::state::{ActionKind, EpisodeResult};

use super::report::{
    DepthPoint, MethodReport, RunContext, RunMetadata, RunReport, SignalAnalysis,
};
use super::{method_specs, EvalError, GridName, QaExample};

/// Step-budget points swept by the reasoning-depth grid unless overridden.
pub const DEFAULT_DEPTH_STEPS: [usize; 4] = [1, 2, 4, 8];

/// Default expected-gain bucket edges for the calibration analysis.
pub fn default_bucket_edges() -> Vec<f64> {
    vec![0.0, 0.33, 0.66, 1.0]
}

const SIGNAL_PAIRING: &str = "per-episode mean of the chosen action's expected gain and of \
the reported uncertainty, each against that episode's final F1; continue-rate buckets pair \
every step's chosen-action gain with whether that step chose neither respond nor stop";

/// Everything an experiment runs against. Borrowed so one dataset, index,
/// and backend source can serve several grids.
pub struct ExperimentInputs<'a> {
    pub examples: &'a [QaExample],
    pub index: &'a Bm25Index,
    pub backend: &'a BackendSource,
    /// Base configuration every method row is derived from.
    pub base: StrategyConfig,
    /// Worker threads per batch: 1 = sequential, 0 = library default.
    pub jobs: usize,
    /// Step-budget points for the depth grid.
    pub depth_steps: Vec<usize>,
    /// Bucket edges for the signal calibration analysis.
    pub bucket_edges: Vec<f64>,
}

impl<'a> ExperimentInputs<'a> {
    pub fn new(
        examples: &'a [QaExample],
        index: &'a Bm25Index,
        backend: &'a BackendSource,
    ) -> Self {
        ExperimentInputs {
            examples,
            index,
            backend,
            base: StrategyConfig::default(),
            jobs: 1,
            depth_steps: DEFAULT_DEPTH_STEPS.to_vec(),
            bucket_edges: default_bucket_edges(),
        }
    }
}

fn run_one(
    task: &EpisodeTask,
    backend: &BackendSource,
    index: &Bm25Index,
    config: &StrategyConfig,
) -> EpisodeResult {
    let episode_backend = backend.episode_backend();
    let deps = Deps { backend: &episode_backend, index };
    run_episode(task, &deps, config)
}

/// Runs one method over a batch of tasks, preserving task order.
///
/// With the `parallel` feature and `jobs != 1`, episodes run on a dedicated
/// thread pool (`jobs == 0` sizes it automatically); otherwise, or if the
/// pool cannot be created, the batch runs sequentially on this thread.
#[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
pub fn run_batch(
    tasks: &[EpisodeTask],
    backend: &BackendSource,
    index: &Bm25Index,
    config: &StrategyConfig,
    jobs: usize,
) -> Vec<EpisodeResult> {
    #[cfg(feature = "parallel")]
    if jobs != 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| {
                tasks
                    .par_iter()
                    .map(|task| run_one(task, backend, index, config))
                    .collect()
            });
        }
    }
    tasks.iter().map(|task| run_one(task, backend, index, config)).collect()
}

/// Correlates logged decision signals with outcomes over the policy rows.
fn analyze_signals(
    methods: &[MethodReport],
    edges: &[f64],
) -> Result<Option<SignalAnalysis>, EvalError> {
    let policy_episodes: Vec<&EpisodeResult> = methods
        .iter()
        .filter(|m| m.config.strategy == Strategy::Policy)
        .flat_map(|m| m.episodes.iter())
        .collect();
    if policy_episodes.is_empty() {
        return Ok(None);
    }

    // Per-step records for the calibration buckets.
    let mut records: Vec<(f64, bool)> = Vec::new();
    // Per-episode means paired with final F1 for the correlations.
    let mut mean_gains = Vec::new();
    let mut mean_uncertainties = Vec::new();
    let mut f1s = Vec::new();

    for episode in policy_episodes {
        let breakdowns: Vec<_> =
            episode.steps.iter().filter_map(|step| step.utility.as_ref()).collect();
        for breakdown in &breakdowns {
            let continued =
                !matches!(breakdown.action_kind, ActionKind::Respond | ActionKind::Stop);
            records.push((breakdown.gain, continued));
        }
        if let (false, Some(f1)) = (breakdowns.is_empty(), episode.f1) {
            let n = breakdowns.len() as f64;
            mean_gains.push(breakdowns.iter().map(|b| b.gain).sum::<f64>() / n);
            mean_uncertainties.push(breakdowns.iter().map(|b| b.uncertainty).sum::<f64>() / n);
            f1s.push(f1);
        }
    }

    Ok(Some(SignalAnalysis {
        // Degenerate inputs (one episode, or constant signals) have no
        // defined correlation; report the buckets regardless.
        pearson_gain_f1: pearson(&mean_gains, &f1s).ok(),
        pearson_uncertainty_f1: pearson(&mean_uncertainties, &f1s).ok(),
        bucket_edges: edges.to_vec(),
        buckets: bucket_continue_rate(&records, edges)?,
    }))
}

/// Runs every method row of `grid` over the sampled examples and assembles
/// the report. Configuration problems fail fast before any episode runs;
/// per-episode backend failures do not — they close their episode with a
/// fallback result that stays in the report.
pub fn run_experiment(
    grid: GridName,
    inputs: &ExperimentInputs<'_>,
    mut context: RunContext,
) -> Result<RunReport, EvalError> {
    if inputs.examples.is_empty() {
        return Err(EvalError::NoExamples);
    }
    inputs.base.validate()?;
    // The context echoes what actually ran, whatever the caller pre-filled.
    context.depth_steps = inputs.depth_steps.clone();
    context.bucket_edges = inputs.bucket_edges.clone();
    context.jobs = inputs.jobs;
    let specs = method_specs(grid, &inputs.base, &inputs.depth_steps);
    for spec in &specs {
        spec.config.validate()?;
    }

    let tasks: Vec<EpisodeTask> = inputs.examples.iter().map(QaExample::to_task).collect();
    let mut methods = Vec::with_capacity(specs.len());
    for spec in specs {
        let episodes = run_batch(&tasks, inputs.backend, inputs.index, &spec.config, inputs.jobs);
        let summary = aggregate(&episodes, &spec.name)?;
        methods.push(MethodReport { method: spec.name, config: spec.config, summary, episodes });
    }

    let signal_analysis = if grid == GridName::Signals {
        analyze_signals(&methods, &inputs.bucket_edges)?
    } else {
        None
    };
    let depth = if grid == GridName::Depth {
        methods
            .iter()
            .map(|m| DepthPoint {
                max_steps: m.config.budget.max_steps,
                mean_f1: m.summary.mean_f1,
                mean_tokens: m.summary.mean_tokens,
                mean_wall_seconds: m.summary.mean_wall_seconds,
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(RunReport {
        metadata: RunMetadata {
            grid,
            context,
            base_config: inputs.base.clone(),
            parallel_enabled: cfg!(feature = "parallel"),
            signal_pairing: signal_analysis.as_ref().map(|_| SIGNAL_PAIRING.to_string()),
        },
        methods,
        signal_analysis,
        depth,
    })
}
