//! Run configuration: a TOML file with `[run]`, `[backend]`, `[retriever]`,
//! and `[strategy]` tables, plus repeatable `--set key=value` dotted-path
//! overrides. Precedence per field: command-line flag > `--set` override >
//! config file > built-in default. Relative paths are resolved against the
//! process working directory.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use orchestra::backend::{load_script, BackendSource, HttpBackend, HttpBackendConfig};
use orchestra::eval::{default_bucket_edges, GridName, DEFAULT_DEPTH_STEPS};
use orchestra::retriever::Bm25Params;
use orchestra::StrategyConfig;

use crate::CliError;

/// Sampling, grid, and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Dataset file: a JSON list of records with `_id`, `question`,
    /// `answer`, and `context` (a list of `[title, [sentences]]` pairs).
    pub dataset: String,
    /// Examples drawn from the dataset (seeded, order-preserving).
    pub sample_size: usize,
    pub seed: u64,
    /// Grid to run: main, cost, fairness, redundancy, signals, ablation,
    /// or depth.
    pub grid: String,
    /// Root directory for run outputs; each run gets a fresh timestamped
    /// subdirectory.
    pub out: String,
    /// Worker threads per batch: 1 = sequential, 0 = automatic.
    pub jobs: usize,
    /// Where the retrieval corpus comes from.
    pub corpus: CorpusMode,
    /// Document directory, required when `corpus = "directory"`.
    pub corpus_dir: Option<String>,
    /// Step budgets swept by the depth grid.
    pub depth_steps: Vec<usize>,
    /// Expected-gain bucket edges for the signals grid.
    pub bucket_edges: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            dataset: String::new(),
            sample_size: 10,
            seed: 7,
            grid: GridName::Main.as_str().to_string(),
            out: "runs".into(),
            jobs: 1,
            corpus: CorpusMode::DatasetContexts,
            corpus_dir: None,
            depth_steps: DEFAULT_DEPTH_STEPS.to_vec(),
            bucket_edges: default_bucket_edges(),
        }
    }
}

/// Retrieval corpus source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusMode {
    /// Build the corpus from the context paragraphs of the sampled examples.
    DatasetContexts,
    /// Load one document per file from `corpus_dir`.
    Directory,
}

/// Model backend settings. Exactly one kind is configured; fields belonging
/// to the other kind must stay unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Scripted: path to the replay script (JSON list of
    /// `{"match": optional tag, "text": body}` entries).
    pub script: Option<String>,
    /// HTTP: full chat-completions endpoint URL.
    pub endpoint: Option<String>,
    /// HTTP: model name sent with every request.
    pub model: Option<String>,
    /// HTTP: name of the environment variable holding the API key. Only the
    /// variable is named here; the key itself is read at startup and never
    /// serialized or echoed anywhere.
    pub api_key_env: Option<String>,
    /// HTTP: maximum concurrent requests.
    pub max_in_flight: usize,
    /// HTTP: per-request timeout.
    pub timeout_seconds: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        let http = HttpBackendConfig::default();
        BackendSection {
            kind: BackendKind::Scripted,
            script: None,
            endpoint: None,
            model: None,
            api_key_env: None,
            max_in_flight: http.max_in_flight,
            timeout_seconds: http.timeout_seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// BM25 parameters for the retrieval index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieverSection {
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrieverSection {
    fn default() -> Self {
        let params = Bm25Params::default();
        RetrieverSection { k1: params.k1, b: params.b }
    }
}

/// The complete effective configuration of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub backend: BackendSection,
    pub retriever: RetrieverSection,
    pub strategy: StrategyConfig,
}

fn field_error(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Field { field: field.to_string(), reason: reason.into() }
}

impl RunConfig {
    /// Rejects unusable configurations with a diagnostic naming the field.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.dataset.trim().is_empty() {
            return Err(field_error("run.dataset", "a dataset path is required"));
        }
        if self.run.sample_size == 0 {
            return Err(field_error("run.sample_size", "must be at least 1"));
        }
        let grid = self.grid()?;
        if self.run.corpus == CorpusMode::Directory
            && self.run.corpus_dir.as_deref().map_or(true, |dir| dir.trim().is_empty())
        {
            return Err(field_error(
                "run.corpus_dir",
                "required when run.corpus = \"directory\"",
            ));
        }
        match self.backend.kind {
            BackendKind::Scripted => {
                if self.backend.script.as_deref().map_or(true, |s| s.trim().is_empty()) {
                    return Err(field_error(
                        "backend.script",
                        "required when backend.kind = \"scripted\"",
                    ));
                }
                for (field, value) in [
                    ("backend.endpoint", &self.backend.endpoint),
                    ("backend.model", &self.backend.model),
                    ("backend.api_key_env", &self.backend.api_key_env),
                ] {
                    if value.is_some() {
                        return Err(field_error(
                            field,
                            "set, but backend.kind = \"scripted\"; configure exactly one backend",
                        ));
                    }
                }
            }
            BackendKind::Http => {
                if self.backend.endpoint.as_deref().map_or(true, |e| e.trim().is_empty()) {
                    return Err(field_error(
                        "backend.endpoint",
                        "required when backend.kind = \"http\"",
                    ));
                }
                if self.backend.model.as_deref().map_or(true, |m| m.trim().is_empty()) {
                    return Err(field_error(
                        "backend.model",
                        "required when backend.kind = \"http\"",
                    ));
                }
                if self.backend.script.is_some() {
                    return Err(field_error(
                        "backend.script",
                        "set, but backend.kind = \"http\"; configure exactly one backend",
                    ));
                }
            }
        }
        self.bm25().validate().map_err(|e| field_error("retriever", e.to_string()))?;
        self.strategy.validate().map_err(|e| field_error("strategy", e.to_string()))?;
        if grid == GridName::Depth && self.run.depth_steps.is_empty() {
            return Err(field_error("run.depth_steps", "must list at least one step budget"));
        }
        if let Some(zero_based) = self.run.depth_steps.iter().position(|s| *s == 0) {
            return Err(field_error(
                "run.depth_steps",
                format!("entry {zero_based} is 0; step budgets must be at least 1"),
            ));
        }
        orchestra::metrics::bucket_continue_rate(&[], &self.run.bucket_edges)
            .map_err(|e| field_error("run.bucket_edges", e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridName, CliError> {
        GridName::from_str(&self.run.grid).map_err(|reason| field_error("run.grid", reason))
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.retriever.k1, b: self.retriever.b }
    }

    /// Builds the configured backend. For HTTP backends this reads the API
    /// key from the named environment variable; the key never leaves the
    /// backend object.
    pub fn backend_source(&self) -> Result<BackendSource, CliError> {
        match self.backend.kind {
            BackendKind::Scripted => {
                let path = self.backend.script.as_deref().unwrap_or_default();
                Ok(BackendSource::scripted(load_script(path)?))
            }
            BackendKind::Http => {
                let defaults = HttpBackendConfig::default();
                let config = HttpBackendConfig {
                    endpoint: self.backend.endpoint.clone().unwrap_or_default(),
                    model: self.backend.model.clone().unwrap_or_default(),
                    api_key_env: self.backend.api_key_env.clone(),
                    max_in_flight: self.backend.max_in_flight,
                    timeout_seconds: self.backend.timeout_seconds,
                    retry_backoff_ms: defaults.retry_backoff_ms,
                };
                Ok(BackendSource::Http(Arc::new(HttpBackend::new(config)?)))
            }
        }
    }

    /// One-line backend description for the report echo. Deliberately omits
    /// the API-key environment variable.
    pub fn describe_backend(&self) -> String {
        match self.backend.kind {
            BackendKind::Scripted => {
                format!("scripted:{}", self.backend.script.as_deref().unwrap_or_default())
            }
            BackendKind::Http => format!(
                "http:{} model={}",
                self.backend.endpoint.as_deref().unwrap_or_default(),
                self.backend.model.as_deref().unwrap_or_default(),
            ),
        }
    }

    pub fn describe_corpus(&self) -> String {
        match self.run.corpus {
            CorpusMode::DatasetContexts => "dataset-contexts".into(),
            CorpusMode::Directory => {
                format!("directory:{}", self.run.corpus_dir.as_deref().unwrap_or_default())
            }
        }
    }

    pub fn describe_retriever(&self) -> String {
        format!("bm25 k1={} b={}", self.retriever.k1, self.retriever.b)
    }
}

/// Parses the right-hand side of a `--set` pair: anything that parses as a
/// TOML value (numbers, booleans, arrays, quoted strings) is taken as such;
/// everything else is a bare string, so paths need no extra quoting.
fn parse_leaf(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut table| table.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `dotted.path = value` inside the configuration tree, creating
/// intermediate tables as needed.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Override {
            key: key.to_string(),
            reason: "empty path segment".into(),
        });
    }
    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        current = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Override {
                key: key.to_string(),
                reason: format!("`{segment}` is not a table"),
            })?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

/// Applies one `key=value` override.
pub fn apply_override(table: &mut toml::Table, pair: &str) -> Result<(), CliError> {
    let (key, raw) = pair.split_once('=').ok_or_else(|| CliError::Override {
        key: pair.to_string(),
        reason: "expected key=value".into(),
    })?;
    set_path(table, key.trim(), parse_leaf(raw.trim()))
}

/// Loads the config file and folds in overrides (lowest to highest
/// precedence), deserializing once at the end so unknown or ill-typed
/// fields are reported wherever they came from.
pub fn load_config(
    path: &std::path::Path,
    overrides: &[String],
    flag_overrides: &[(&str, toml::Value)],
) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    for pair in overrides {
        apply_override(&mut table, pair)?;
    }
    for (key, value) in flag_overrides {
        set_path(&mut table, key, value.clone())?;
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Parse {
        path: format!("{} (with overrides)", path.display()),
        reason: e.to_string(),
    })
}
