//! Answer scoring and result aggregation.
//!
//! Answer quality uses the SQuAD-style token-level F1: answers are
//! normalized (lowercase, ASCII punctuation deleted, the articles a/an/the
//! dropped as whole words, whitespace collapsed) and compared as token
//! multisets. Derived metrics — efficiency (mean F1 per token), Pearson
//! correlation for signal analysis, and continue-rate calibration buckets —
//! are plain functions over episode results.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::EpisodeResult;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty result list")]
    EmptyInput,
    #[error("tokens must be positive, got {0}")]
    NonPositiveTokens(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance makes correlation undefined")]
    ZeroVariance,
    #[error("inputs must be finite")]
    NonFiniteInput,
    #[error("malformed bucket edges: {0}")]
    MalformedEdges(String),
}

// ─── Answer F1 ──────────────────────────────────────────────────────────────

/// Lowercases, deletes ASCII punctuation, drops the whole-word articles
/// a/an/the, and collapses whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let without_punctuation: String =
        lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    without_punctuation
        .split_whitespace()
        .filter(|word| !matches!(*word, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Result {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

fn token_counts(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in normalize_answer(text).split_whitespace() {
        *counts.entry(token.to_string()).or_insert(0) += 1;
    }
    counts
}

/// Token-level F1 over normalized token multisets.
///
/// If either side normalizes to nothing, the score is 1.0 when both are
/// empty and 0.0 otherwise.
pub fn f1_score(prediction: &str, gold: &str) -> F1Result {
    let prediction_counts = token_counts(prediction);
    let gold_counts = token_counts(gold);
    let prediction_len: usize = prediction_counts.values().sum();
    let gold_len: usize = gold_counts.values().sum();
    if prediction_len == 0 || gold_len == 0 {
        let score = if prediction_len == gold_len { 1.0 } else { 0.0 };
        return F1Result { f1: score, precision: score, recall: score };
    }
    let common: usize = prediction_counts
        .iter()
        .map(|(token, count)| count.min(gold_counts.get(token).unwrap_or(&0)))
        .sum();
    if common == 0 {
        return F1Result { f1: 0.0, precision: 0.0, recall: 0.0 };
    }
    let precision = common as f64 / prediction_len as f64;
    let recall = common as f64 / gold_len as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    F1Result { f1, precision, recall }
}

// ─── Derived metrics ────────────────────────────────────────────────────────

/// Quality per token: `f1 / tokens`.
pub fn efficiency(f1: f64, tokens: f64) -> Result<f64, MetricsError> {
    if !f1.is_finite() || !tokens.is_finite() {
        return Err(MetricsError::NonFiniteInput);
    }
    if tokens <= 0.0 {
        return Err(MetricsError::NonPositiveTokens(tokens));
    }
    Ok(f1 / tokens)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewPoints(x.len()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteInput);
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut variance_x = 0.0;
    let mut variance_y = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let da = a - mean_x;
        let db = b - mean_y;
        covariance += da * db;
        variance_x += da * da;
        variance_y += db * db;
    }
    if variance_x == 0.0 || variance_y == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(covariance / (variance_x * variance_y).sqrt())
}

/// One calibration bucket over expected gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStat {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Fraction of records in this bucket whose step continued (chose
    /// neither respond nor stop); absent for empty buckets.
    pub continue_rate: Option<f64>,
}

/// Buckets `(expected_gain, continued)` records into `[edge_i, edge_{i+1})`
/// intervals (the last interval closed above).
pub fn bucket_continue_rate(
    records: &[(f64, bool)],
    edges: &[f64],
) -> Result<Vec<BucketStat>, MetricsError> {
    if edges.len() < 2 {
        return Err(MetricsError::MalformedEdges("need at least two edges".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(MetricsError::MalformedEdges("edges must be finite".into()));
    }
    if edges[0] != 0.0 || *edges.last().expect("non-empty") != 1.0 {
        return Err(MetricsError::MalformedEdges("edges must start at 0 and end at 1".into()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::MalformedEdges("edges must be strictly ascending".into()));
    }
    let bucket_count = edges.len() - 1;
    let mut counts = vec![0usize; bucket_count];
    let mut continued = vec![0usize; bucket_count];
    for (gain, did_continue) in records {
        let value = gain.clamp(0.0, 1.0);
        let index = edges
            .windows(2)
            .position(|w| value < w[1])
            .unwrap_or(bucket_count - 1);
        counts[index] += 1;
        if *did_continue {
            continued[index] += 1;
        }
    }
    Ok((0..bucket_count)
        .map(|i| BucketStat {
            lower: edges[i],
            upper: edges[i + 1],
            count: counts[i],
            continue_rate: if counts[i] == 0 {
                None
            } else {
                Some(continued[i] as f64 / counts[i] as f64)
            },
        })
        .collect())
}

// ─── Aggregation ────────────────────────────────────────────────────────────

/// Per-method aggregate over a batch of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_f1: f64,
    pub mean_tokens: f64,
    pub mean_wall_seconds: f64,
    /// `mean_f1 / mean_tokens`; 0 when no tokens were consumed.
    pub efficiency: f64,
    pub mean_tool_calls: f64,
    pub mean_redundant_tool_calls: f64,
    pub episode_count: usize,
}

/// Arithmetic means over the batch. Episode F1 is averaged over the episodes
/// that have a gold answer; a batch with no scored episodes reports 0.
pub fn aggregate(results: &[EpisodeResult], method: &str) -> Result<MethodSummary, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = results.len() as f64;
    let scored: Vec<f64> = results.iter().filter_map(|r| r.f1).collect();
    let mean_f1 = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    let mean_tokens = results.iter().map(|r| r.total_tokens as f64).sum::<f64>() / n;
    let mean_wall_seconds = results.iter().map(|r| r.wall_seconds).sum::<f64>() / n;
    let mean_tool_calls = results.iter().map(|r| r.tool_calls as f64).sum::<f64>() / n;
    let mean_redundant_tool_calls =
        results.iter().map(|r| r.redundant_tool_calls as f64).sum::<f64>() / n;
    let efficiency = if mean_tokens > 0.0 { mean_f1 / mean_tokens } else { 0.0 };
    Ok(MethodSummary {
        method: method.to_string(),
        mean_f1,
        mean_tokens,
        mean_wall_seconds,
        efficiency,
        mean_tool_calls,
        mean_redundant_tool_calls,
        episode_count: results.len(),
    })
}
