//! End-to-end tests of the `orchestra` binary: spawn the real executable,
//! point it at the bundled fixtures, and inspect exit codes, stdout/stderr,
//! and the files it writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// Runs the binary from the repository root so the bundled config's
/// relative fixture paths resolve.
fn orchestra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orchestra"))
        .args(args)
        .current_dir(repo_root())
        .output()
        .expect("binary should spawn")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

/// The single run directory inside `root` (each test uses a fresh tempdir
/// per invocation unless it deliberately runs twice).
fn only_run_dir(root: &Path) -> PathBuf {
    let mut entries: Vec<PathBuf> =
        std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "expected exactly one run directory in {}", root.display());
    entries.pop().unwrap()
}

fn report_json(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn method_names(report: &serde_json::Value) -> Vec<String> {
    report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap().to_string())
        .collect()
}

/// Zeroes every wall-clock field so two reports from different runs can be
/// compared byte-for-byte on everything that should be deterministic
/// (token counts, F1, efficiency, tool calls, configuration, ...).
fn zero_wall_fields(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, inner) in map.iter_mut() {
                if key == "wall_seconds" || key == "mean_wall_seconds" {
                    *inner = serde_json::json!(0.0);
                } else {
                    zero_wall_fields(inner);
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(zero_wall_fields),
        _ => {}
    }
}

#[test]
fn run_writes_a_complete_report_directory() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let dir = only_run_dir(out.path());
    assert!(dir.join("report.json").is_file());
    assert!(dir.join("summary.csv").is_file());
    assert!(dir.join("pareto.csv").is_file());
    let report = report_json(&dir);
    assert_eq!(method_names(&report).len(), 7, "main grid runs all seven methods");
    assert!(stdout(&output).contains("wrote "));

    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "method,mean_f1,mean_tokens,mean_wall_seconds,efficiency,\
         mean_tool_calls,mean_redundant_tool_calls,episodes"
    ));
}

#[test]
fn report_echoes_the_effective_configuration() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--set",
        "run.sample_size=3",
        "--set",
        "strategy.weights.cost=0.5",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report = report_json(&only_run_dir(out.path()));
    let context = &report["metadata"]["context"];
    assert_eq!(context["sample_size"], serde_json::json!(3));
    assert_eq!(context["seed"], serde_json::json!(7));
    assert_eq!(context["dataset"], serde_json::json!("fixtures/qa_mini.json"));
    assert_eq!(context["retriever"], serde_json::json!("bm25 k1=1.5 b=0.75"));
    assert_eq!(
        report["metadata"]["base_config"]["weights"]["cost"],
        serde_json::json!(0.5)
    );
    // Every method row carries its own full effective configuration too.
    for method in report["methods"].as_array().unwrap() {
        assert!(method["config"]["weights"].is_object());
        assert!(method["config"]["budget"]["max_steps"].is_number());
    }
}

#[test]
fn missing_dataset_fails_with_a_named_field() {
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--set",
        "run.dataset=",
    ]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("run.dataset"), "stderr: {}", stderr(&output));
}

#[test]
fn unknown_override_key_is_rejected() {
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--set",
        "run.sampel_size=3",
    ]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("sampel_size"), "stderr: {}", stderr(&output));
}

#[test]
fn ablate_produces_exactly_the_five_policy_variants() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "ablate",
        "--config",
        "fixtures/configs/scripted.toml",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report = report_json(&only_run_dir(out.path()));
    assert_eq!(
        method_names(&report),
        ["full policy", "-expected-gain", "-uncertainty", "-redundancy", "-stop"]
    );
}

#[test]
fn two_runs_are_identical_except_wall_clock() {
    let run = || {
        let out = tempfile::tempdir().unwrap();
        let output = orchestra(&[
            "run",
            "--config",
            "fixtures/configs/scripted.toml",
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
        report_json(&only_run_dir(out.path()))
    };
    let (mut first, mut second) = (run(), run());
    zero_wall_fields(&mut first);
    zero_wall_fields(&mut second);
    assert_eq!(first, second);
}

#[test]
fn depth_grid_writes_depth_csv() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--grid",
        "depth",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let dir = only_run_dir(out.path());
    let depth = std::fs::read_to_string(dir.join("depth.csv")).unwrap();
    assert!(depth.starts_with("max_steps,f1,tokens,wall"));
    assert_eq!(depth.lines().count(), 5, "header plus the four default budgets");
}

#[test]
fn signals_grid_writes_buckets_csv() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--grid",
        "signals",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let dir = only_run_dir(out.path());
    let buckets = std::fs::read_to_string(dir.join("buckets.csv")).unwrap();
    assert!(buckets.starts_with("bucket,count,continue_rate"));
}

#[test]
fn command_line_grid_beats_set_which_beats_file() {
    let out = tempfile::tempdir().unwrap();
    // File says main, --set says cost, --grid says depth: depth must win.
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--set",
        "run.grid=cost",
        "--grid",
        "depth",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report = report_json(&only_run_dir(out.path()));
    assert_eq!(report["metadata"]["grid"], serde_json::json!("depth"));

    // Without the flag, --set wins over the file.
    let out2 = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--set",
        "run.grid=cost",
        "--out",
        out2.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let report = report_json(&only_run_dir(out2.path()));
    assert_eq!(report["metadata"]["grid"], serde_json::json!("cost"));
}

#[test]
fn index_prints_stats_and_is_deterministic() {
    let docs = tempfile::tempdir().unwrap();
    std::fs::write(
        docs.path().join("alpha.txt"),
        "Alpha Title\nThe quick brown fox jumps over the lazy dog.\n",
    )
    .unwrap();
    std::fs::write(
        docs.path().join("beta.txt"),
        "Beta Title\nA slow green turtle walks under the busy bridge.\n",
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let first_path = out.path().join("first.json");
    let second_path = out.path().join("second.json");

    let run_index = |path: &Path| {
        let output = orchestra(&[
            "index",
            "--corpus",
            docs.path().to_str().unwrap(),
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
        stdout(&output)
    };
    let text = run_index(&first_path);
    assert!(text.contains("N=2"), "stdout: {text}");
    assert!(text.contains("avgdl="), "stdout: {text}");
    assert!(text.contains("vocabulary="), "stdout: {text}");
    run_index(&second_path);
    assert_eq!(
        std::fs::read(&first_path).unwrap(),
        std::fs::read(&second_path).unwrap(),
        "index serialization is deterministic"
    );
}

#[test]
fn report_subcommand_rerenders_identical_csvs() {
    let out = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "run",
        "--config",
        "fixtures/configs/scripted.toml",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let dir = only_run_dir(out.path());
    let original = std::fs::read_to_string(dir.join("summary.csv")).unwrap();

    let rerender = tempfile::tempdir().unwrap();
    let output = orchestra(&[
        "report",
        "--report",
        dir.join("report.json").to_str().unwrap(),
        "--out",
        rerender.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let rerendered = std::fs::read_to_string(rerender.path().join("summary.csv")).unwrap();
    assert_eq!(rerendered, original);
    assert!(rerender.path().join("pareto.csv").is_file());
}

#[test]
fn http_backend_without_key_fails_naming_the_variable() {
    let out = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_orchestra"))
        .args([
            "run",
            "--config",
            "fixtures/configs/http.toml",
            "--set",
            "backend.api_key_env=ORCHESTRA_TEST_UNSET_KEY",
            "--out",
            out.path().to_str().unwrap(),
        ])
        .current_dir(repo_root())
        .env_remove("ORCHESTRA_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert!(!output.status.success());
    let text = stderr(&output);
    assert!(text.contains("ORCHESTRA_TEST_UNSET_KEY"), "stderr: {text}");
    // Nothing was written: configuration failed before any report existed.
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn run_jobs_flag_is_echoed_and_matches_sequential_results() {
    let run_with_jobs = |jobs: &str| {
        let out = tempfile::tempdir().unwrap();
        let output = orchestra(&[
            "run",
            "--config",
            "fixtures/configs/scripted.toml",
            "--jobs",
            jobs,
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert!(output.status.success(), "stderr: {}", stderr(&output));
        report_json(&only_run_dir(out.path()))
    };
    let mut sequential = run_with_jobs("1");
    let mut parallel = run_with_jobs("0");
    assert_eq!(sequential["metadata"]["context"]["jobs"], serde_json::json!(1));
    assert_eq!(parallel["metadata"]["context"]["jobs"], serde_json::json!(0));
    // Same results regardless of worker count.
    sequential["metadata"]["context"]["jobs"] = serde_json::json!(0);
    zero_wall_fields(&mut sequential);
    zero_wall_fields(&mut parallel);
    assert_eq!(sequential, parallel);
}
