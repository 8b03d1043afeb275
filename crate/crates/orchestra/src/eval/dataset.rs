//! Dataset loading and corpus construction.
//!
//! The on-disk format is the HotpotQA distractor layout: a JSON array of
//! records with `_id`, `question`, `answer`, and `context`, where context is
//! a list of `[title, [sentence, ...]]` pairs. Sampling is deterministic
//! given `(seed, sample_size)` and preserves the file's original order
//! within the selected subset.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::orchestrator::EpisodeTask;
use crate::retriever::Document;

use super::EvalError;

/// One question-answering example with its context paragraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaExample {
    #[serde(rename = "_id")]
    pub id: String,
    pub question: String,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    /// Context paragraphs as `(title, sentences)` pairs; in the distractor
    /// setting most are unrelated to the question.
    pub context: Vec<(String, Vec<String>)>,
}

impl QaExample {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.question.trim().is_empty() {
            return Err(EvalError::InvalidExample {
                id: self.id.clone(),
                reason: "question is empty".into(),
            });
        }
        if self.gold_answer.trim().is_empty() {
            return Err(EvalError::InvalidExample {
                id: self.id.clone(),
                reason: "gold answer is empty".into(),
            });
        }
        Ok(())
    }

    pub fn to_task(&self) -> EpisodeTask {
        EpisodeTask {
            question_id: self.id.clone(),
            question: self.question.clone(),
            gold_answer: Some(self.gold_answer.clone()),
        }
    }
}

/// Loads and deterministically samples a dataset file.
///
/// Sampling shuffles the example indices with a seeded generator, keeps the
/// first `sample_size`, then restores original file order, so the same
/// `(seed, sample_size)` always yields the same id list and
/// `sample_size == len` yields the full file unchanged.
pub fn load_dataset(
    path: impl AsRef<Path>,
    sample_size: usize,
    seed: u64,
) -> Result<Vec<QaExample>, EvalError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EvalError::Dataset {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let examples: Vec<QaExample> =
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| EvalError::Dataset {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    for example in &examples {
        example.validate()?;
    }
    sample(examples, sample_size, seed)
}

fn sample(
    examples: Vec<QaExample>,
    sample_size: usize,
    seed: u64,
) -> Result<Vec<QaExample>, EvalError> {
    if sample_size > examples.len() {
        return Err(EvalError::SampleTooLarge {
            requested: sample_size,
            available: examples.len(),
        });
    }
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(sample_size);
    indices.sort_unstable();
    let mut keep = vec![false; examples.len()];
    for index in indices {
        keep[index] = true;
    }
    Ok(examples
        .into_iter()
        .zip(keep)
        .filter_map(|(example, kept)| kept.then_some(example))
        .collect())
}

/// Builds a retrieval corpus from the context paragraphs of the examples.
///
/// Paragraph titles repeat across examples (distractors are shared); the
/// first occurrence of each title wins. Documents come out sorted by title,
/// so the corpus — and any index built from it — is deterministic.
pub fn corpus_from_examples(examples: &[QaExample]) -> Vec<Document> {
    let mut by_title = std::collections::BTreeMap::new();
    for example in examples {
        for (title, sentences) in &example.context {
            by_title
                .entry(title.clone())
                .or_insert_with(|| sentences.join(" "));
        }
    }
    by_title
        .into_iter()
        .map(|(title, body)| Document { id: title.clone(), title, body })
        .collect()
}
