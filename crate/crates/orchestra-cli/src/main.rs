//! Command-line front end for the orchestration benchmark.
//!
//! Subcommands:
//! - `run`    — execute a comparison grid and write a timestamped run
//!   directory with `report.json` plus CSV views.
//! - `ablate` — shorthand for the utility-term ablation grid.
//! - `index`  — build a retrieval index from a document directory and print
//!   its statistics.
//! - `report` — re-render the CSV views from an existing `report.json`.
//!
//! The process exits 0 exactly when the configuration was usable; episode
//! failures during a run are recorded in the report, not fatal.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use orchestra::eval::{corpus_from_examples, load_dataset, RunContext, RunReport};
use orchestra::retriever::{load_corpus_dir, Bm25Index, Bm25Params, Document};
use orchestra::{run_experiment, ExperimentInputs, GridName};

use config::{load_config, CorpusMode, RunConfig};

/// Anything that can stop a command before or during execution.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid --set override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid configuration: field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error(transparent)]
    Backend(#[from] orchestra::BackendError),
    #[error(transparent)]
    Retriever(#[from] orchestra::retriever::RetrieverError),
    #[error(transparent)]
    Eval(#[from] orchestra::eval::EvalError),
}

#[derive(Parser)]
#[command(name = "orchestra", version, about = "Utility-guided agent orchestration benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a comparison grid and write a report directory.
    Run(RunArgs),
    /// Run the utility-term ablation grid (fixed grid, otherwise like `run`).
    Ablate(AblateArgs),
    /// Build a retrieval index from a directory of text documents.
    Index {
        /// Directory with one document per file (first line = title).
        #[arg(long)]
        corpus: PathBuf,
        /// Where to write the serialized index (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render the CSV views from an existing report.json.
    Report {
        /// Path to a report.json produced by `run` or `ablate`.
        #[arg(long)]
        report: PathBuf,
        /// Output directory for the CSVs (default: next to the report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override one configuration value by dotted path, e.g.
    /// `--set run.sample_size=5`; repeatable, later wins.
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Grid to run (overrides the config file and --set).
    #[arg(long)]
    grid: Option<String>,
    /// Output root directory (overrides the config file and --set).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads: 1 = sequential, 0 = automatic (overrides config).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override one configuration value by dotted path; repeatable.
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output root directory (overrides the config file and --set).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads: 1 = sequential, 0 = automatic (overrides config).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Index { corpus, out } => cmd_index(&corpus, &out),
        Command::Report { report, out } => cmd_report(&report, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}

/// Turns command-line flags into highest-precedence config overrides.
fn flag_overrides(
    grid: Option<&str>,
    out: Option<&Path>,
    jobs: Option<usize>,
) -> Vec<(&'static str, toml::Value)> {
    let mut flags = Vec::new();
    if let Some(grid) = grid {
        flags.push(("run.grid", toml::Value::String(grid.to_string())));
    }
    if let Some(out) = out {
        flags.push(("run.out", toml::Value::String(out.display().to_string())));
    }
    if let Some(jobs) = jobs {
        flags.push(("run.jobs", toml::Value::Integer(jobs as i64)));
    }
    flags
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let flags = flag_overrides(args.grid.as_deref(), args.out.as_deref(), args.jobs);
    let config = load_config(&args.config, &args.set, &flags)?;
    execute(&config)
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let flags = flag_overrides(Some(GridName::Ablation.as_str()), args.out.as_deref(), args.jobs);
    let config = load_config(&args.config, &args.set, &flags)?;
    execute(&config)
}

/// Validates the effective configuration, runs the grid, and writes one
/// fresh run directory. Every output file is rendered before anything
/// touches the filesystem, so a failed run leaves no partial report.
fn execute(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    let grid = config.grid()?;

    let examples = load_dataset(&config.run.dataset, config.run.sample_size, config.run.seed)?;
    let corpus: Vec<Document> = match config.run.corpus {
        CorpusMode::DatasetContexts => corpus_from_examples(&examples),
        CorpusMode::Directory => {
            load_corpus_dir(config.run.corpus_dir.as_deref().unwrap_or_default())?
        }
    };
    let index = Bm25Index::build(&corpus, config.bm25())?;
    let backend = config.backend_source()?;

    let mut inputs = ExperimentInputs::new(&examples, &index, &backend);
    inputs.base = config.strategy.clone();
    inputs.jobs = config.run.jobs;
    inputs.depth_steps = config.run.depth_steps.clone();
    inputs.bucket_edges = config.run.bucket_edges.clone();

    let context = RunContext {
        dataset: config.run.dataset.clone(),
        sample_size: examples.len(),
        seed: config.run.seed,
        backend: config.describe_backend(),
        corpus: config.describe_corpus(),
        retriever: config.describe_retriever(),
        ..RunContext::default()
    };

    let report = run_experiment(grid, &inputs, context)?;
    let files = output::render_files(&report)?;
    let dir = output::fresh_run_dir(Path::new(&config.run.out), grid.as_str())?;
    output::write_files(&dir, &files)?;

    for method in &report.methods {
        let s = &method.summary;
        println!(
            "{}: f1={:.4} tokens={:.1} wall={:.3}s tool_calls={:.2} episodes={}",
            s.method, s.mean_f1, s.mean_tokens, s.mean_wall_seconds, s.mean_tool_calls,
            s.episode_count,
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_index(corpus_dir: &Path, out: &Path) -> Result<(), CliError> {
    let corpus = load_corpus_dir(corpus_dir)?;
    let index = Bm25Index::build(&corpus, Bm25Params::default())?;
    let json = serde_json::to_string(&index).map_err(|e| CliError::Io {
        path: out.display().to_string(),
        reason: e.to_string(),
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    std::fs::write(out, json).map_err(|e| CliError::Io {
        path: out.display().to_string(),
        reason: e.to_string(),
    })?;
    println!("N={}", index.doc_count());
    println!("avgdl={}", index.avgdl());
    println!("vocabulary={}", index.vocabulary_size());
    println!("index written to {}", out.display());
    Ok(())
}

fn cmd_report(report_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(report_path).map_err(|e| CliError::Io {
        path: report_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let report: RunReport = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: report_path.display().to_string(),
        reason: e.to_string(),
    })?;
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| report_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let files = output::render_files(&report)?;
    for (name, contents) in files.iter().filter(|(name, _)| *name != output::REPORT_FILE) {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
