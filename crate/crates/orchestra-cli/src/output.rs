//! Run-directory layout and report rendering.
//!
//! Every run writes into a fresh timestamped subdirectory of the output
//! root; nothing is overwritten. All files are rendered in memory first so
//! a failure never leaves a partial report behind.

use std::path::{Path, PathBuf};

use orchestra::eval::{buckets_csv, depth_csv, pareto_csv, summary_csv, RunReport};

use crate::CliError;

/// File name of the canonical JSON report inside a run directory.
pub const REPORT_FILE: &str = "report.json";

fn io_error(path: &Path, error: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), reason: error.to_string() }
}

/// Renders every output file for a report: always `report.json`,
/// `summary.csv`, and `pareto.csv`; `buckets.csv` and `depth.csv` when the
/// report carries those sections.
pub fn render_files(report: &RunReport) -> Result<Vec<(&'static str, String)>, CliError> {
    let mut files = Vec::new();
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Io {
        path: REPORT_FILE.into(),
        reason: e.to_string(),
    })?;
    files.push((REPORT_FILE, json + "\n"));
    files.push(("summary.csv", summary_csv(report)));
    files.push(("pareto.csv", pareto_csv(report)));
    if let Some(text) = buckets_csv(report) {
        files.push(("buckets.csv", text));
    }
    if let Some(text) = depth_csv(report) {
        files.push(("depth.csv", text));
    }
    Ok(files)
}

/// Creates `root/<UTC stamp>-<label>`, appending `-2`, `-3`, ... if runs
/// land within the same second.
pub fn fresh_run_dir(root: &Path, label: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-{label}");
    for attempt in 1u32.. {
        let name = if attempt == 1 { base.clone() } else { format!("{base}-{attempt}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_error(&dir, e)),
        }
    }
    unreachable!("directory creation loop always returns");
}

/// Writes pre-rendered files into `dir`.
pub fn write_files(dir: &Path, files: &[(&'static str, String)]) -> Result<(), CliError> {
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}
