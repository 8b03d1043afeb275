//! Run reports: the structured result of one experiment, plus CSV renderers
//! for the summary table and the plot-data files.
//!
//! A report is self-contained: run metadata, the effective configuration of
//! every method row, per-method summaries, and the raw per-episode records.
//! Wall-clock fields are the only nondeterministic content; callers that
//! compare reports should clear them first with [`clear_wall_fields`].

use serde::{Deserialize, Serialize};

use crate::metrics::{BucketStat, MethodSummary};
use crate::orchestrator::StrategyConfig;
use crate::state::EpisodeResult;

use super::GridName;

/// How the run was set up: everything a third party needs to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunContext {
    /// Dataset file the sample was drawn from.
    pub dataset: String,
    /// Number of examples sampled.
    pub sample_size: usize,
    /// Sampling seed (echoed so others can fix the same sample).
    pub seed: u64,
    /// Backend kind: "scripted" or "http".
    pub backend: String,
    /// Corpus source description (dataset contexts or a directory path).
    pub corpus: String,
    /// Retrieval settings description (never carries secrets).
    pub retriever: String,
    /// Requested worker count (0 = library default).
    pub jobs: usize,
    /// Step budgets swept by the depth grid (echoed on every run;
    /// overwritten with the effective values by the experiment runner).
    pub depth_steps: Vec<usize>,
    /// Signal-analysis bucket edges (echoed the same way).
    pub bucket_edges: Vec<f64>,
}

impl Default for RunContext {
    fn default() -> Self {
        RunContext {
            dataset: String::new(),
            sample_size: 0,
            seed: 0,
            backend: "scripted".into(),
            corpus: "dataset-contexts".into(),
            retriever: "bm25 k1=1.5 b=0.75".into(),
            jobs: 1,
            depth_steps: Vec::new(),
            bucket_edges: Vec::new(),
        }
    }
}

/// Report header: the grid, the run context, and the base configuration
/// every method row was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub grid: GridName,
    pub context: RunContext,
    pub base_config: StrategyConfig,
    /// Whether this build can fan episodes out across threads.
    pub parallel_enabled: bool,
    /// How signal records were paired for the correlation analysis; present
    /// only on reports that carry a signal analysis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signal_pairing: Option<String>,
}

/// One method row: its name, effective configuration, aggregate summary,
/// and the raw episodes behind the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub config: StrategyConfig,
    pub summary: MethodSummary,
    pub episodes: Vec<EpisodeResult>,
}

/// Correlation and calibration analysis of the control signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalAnalysis {
    /// Pearson correlation of per-episode mean expected gain vs final F1;
    /// absent when the inputs are degenerate (too few points, zero variance).
    pub pearson_gain_f1: Option<f64>,
    /// Pearson correlation of per-episode mean uncertainty vs final F1.
    pub pearson_uncertainty_f1: Option<f64>,
    /// Bucket edges used for the continue-rate analysis.
    pub bucket_edges: Vec<f64>,
    /// Continue-rate per expected-gain bucket over all logged steps.
    pub buckets: Vec<BucketStat>,
}

/// One point of the reasoning-depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub max_steps: usize,
    pub mean_f1: f64,
    pub mean_tokens: f64,
    pub mean_wall_seconds: f64,
}

/// The complete result of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metadata: RunMetadata,
    pub methods: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signal_analysis: Option<SignalAnalysis>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub depth: Vec<DepthPoint>,
}

fn render_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("writing to memory cannot fail");
    for row in rows {
        writer
            .write_record(row.into_iter().collect::<Vec<String>>())
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("no partial flush on memory writer"))
        .expect("csv output is UTF-8")
}

fn float(value: f64) -> String {
    // Shortest round-trip formatting keeps CSVs deterministic and lossless.
    format!("{value}")
}

/// Renders the per-method summary table.
pub fn summary_csv(report: &RunReport) -> String {
    render_csv(
        &[
            "method",
            "mean_f1",
            "mean_tokens",
            "mean_wall_seconds",
            "efficiency",
            "mean_tool_calls",
            "mean_redundant_tool_calls",
            "episodes",
        ],
        report.methods.iter().map(|m| {
            vec![
                m.summary.method.clone(),
                float(m.summary.mean_f1),
                float(m.summary.mean_tokens),
                float(m.summary.mean_wall_seconds),
                float(m.summary.efficiency),
                float(m.summary.mean_tool_calls),
                float(m.summary.mean_redundant_tool_calls),
                m.summary.episode_count.to_string(),
            ]
        }),
    )
}

/// Renders the quality-cost frontier plot data (one point per method).
pub fn pareto_csv(report: &RunReport) -> String {
    render_csv(
        &["method", "mean_f1", "mean_tokens", "mean_wall"],
        report.methods.iter().map(|m| {
            vec![
                m.summary.method.clone(),
                float(m.summary.mean_f1),
                float(m.summary.mean_tokens),
                float(m.summary.mean_wall_seconds),
            ]
        }),
    )
}

/// Renders the expected-gain bucket plot data, if the report carries a
/// signal analysis. Buckets with no records leave the rate column empty.
pub fn buckets_csv(report: &RunReport) -> Option<String> {
    let analysis = report.signal_analysis.as_ref()?;
    Some(render_csv(
        &["bucket", "count", "continue_rate"],
        analysis.buckets.iter().enumerate().map(|(index, bucket)| {
            vec![
                index.to_string(),
                bucket.count.to_string(),
                bucket.continue_rate.map(float).unwrap_or_default(),
            ]
        }),
    ))
}

/// Renders the depth-sweep plot data, if the report carries one.
pub fn depth_csv(report: &RunReport) -> Option<String> {
    if report.depth.is_empty() {
        return None;
    }
    Some(render_csv(
        &["max_steps", "f1", "tokens", "wall"],
        report.depth.iter().map(|point| {
            vec![
                point.max_steps.to_string(),
                float(point.mean_f1),
                float(point.mean_tokens),
                float(point.mean_wall_seconds),
            ]
        }),
    ))
}

/// Zeroes every wall-clock field, leaving only deterministic content.
/// Two runs with the same scripted backend and seed must serialize
/// identically after this.
pub fn clear_wall_fields(report: &mut RunReport) {
    for method in &mut report.methods {
        method.summary.mean_wall_seconds = 0.0;
        method.summary.efficiency = if method.summary.mean_tokens > 0.0 {
            method.summary.mean_f1 / method.summary.mean_tokens
        } else {
            0.0
        };
        for episode in &mut method.episodes {
            episode.wall_seconds = 0.0;
        }
    }
    for point in &mut report.depth {
        point.mean_wall_seconds = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::TerminationReason;

    fn sample_report() -> RunReport {
        let episodes = vec![EpisodeResult {
            question_id: "q1".into(),
            final_answer: "Paris".into(),
            termination_reason: TerminationReason::Responded,
            total_tokens: 100,
            wall_seconds: 0.25,
            tool_calls: 1,
            redundant_tool_calls: 0,
            steps: Vec::new(),
            f1: Some(1.0),
        }];
        let summary = crate::metrics::aggregate(&episodes, "direct").unwrap();
        RunReport {
            metadata: RunMetadata {
                grid: GridName::Main,
                context: RunContext::default(),
                base_config: StrategyConfig::default(),
                parallel_enabled: cfg!(feature = "parallel"),
                signal_pairing: None,
            },
            methods: vec![MethodReport {
                method: "direct".into(),
                config: StrategyConfig::default(),
                summary,
                episodes,
            }],
            signal_analysis: Some(SignalAnalysis {
                pearson_gain_f1: Some(0.5),
                pearson_uncertainty_f1: None,
                bucket_edges: vec![0.0, 0.5, 1.0],
                buckets: vec![
                    BucketStat { lower: 0.0, upper: 0.5, count: 0, continue_rate: None },
                    BucketStat { lower: 0.5, upper: 1.0, count: 2, continue_rate: Some(0.5) },
                ],
            }),
            depth: vec![DepthPoint {
                max_steps: 4,
                mean_f1: 0.5,
                mean_tokens: 200.0,
                mean_wall_seconds: 1.5,
            }],
        }
    }

    #[test]
    fn summary_csv_has_one_row_per_method() {
        let csv = summary_csv(&sample_report());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("method,mean_f1,mean_tokens"));
        assert!(lines[1].starts_with("direct,1,100,"));
    }

    #[test]
    fn pareto_csv_matches_pinned_schema() {
        let csv = pareto_csv(&sample_report());
        assert_eq!(csv.lines().next().unwrap(), "method,mean_f1,mean_tokens,mean_wall");
    }

    #[test]
    fn buckets_csv_leaves_empty_rate_blank() {
        let csv = buckets_csv(&sample_report()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bucket,count,continue_rate");
        assert_eq!(lines[1], "0,0,");
        assert_eq!(lines[2], "1,2,0.5");
    }

    #[test]
    fn depth_csv_matches_pinned_schema() {
        let csv = depth_csv(&sample_report()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "max_steps,f1,tokens,wall");
        assert_eq!(lines[1], "4,0.5,200,1.5");
    }

    #[test]
    fn depth_csv_renders_wall_time() {
        let report = sample_report();
        let csv = depth_csv(&report).unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with("1.5"));
    }

    #[test]
    fn clear_wall_fields_makes_reports_comparable() {
        let mut a = sample_report();
        let mut b = sample_report();
        b.methods[0].episodes[0].wall_seconds = 9.0;
        b.methods[0].summary.mean_wall_seconds = 9.0;
        b.depth[0].mean_wall_seconds = 9.0;
        clear_wall_fields(&mut a);
        clear_wall_fields(&mut b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = sample_report();
        let json = serde_json::to_string(&report).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn missing_sections_are_omitted() {
        let mut report = sample_report();
        report.signal_analysis = None;
        report.depth.clear();
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("signal_analysis"));
        assert!(!json.contains("\"depth\""));
        assert!(buckets_csv(&report).is_none());
        assert!(depth_csv(&report).is_none());
    }
}
