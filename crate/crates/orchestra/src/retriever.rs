//! Local BM25 retrieval over an in-memory corpus.
//!
//! This is the single external evidence tool every strategy shares. The
//! index is immutable once built and safe to query from many episodes
//! concurrently. Tokenization is shared with [`crate::redundancy`] so
//! queries, documents, and redundancy comparisons all live in one token
//! space.
//!
//! Scoring uses the Lucene-style non-negative idf,
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, which keeps scores ≥ 0
//! even for terms present in most documents.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::redundancy::normalize_tokens;
use crate::state::truncate_chars;

/// Characters of document body returned as the retrieval snippet.
pub const SNIPPET_CHAR_LIMIT: usize = 1500;

#[derive(Debug, Error)]
pub enum RetrieverError {
    #[error("corpus must contain at least one document")]
    EmptyCorpus,
    #[error("duplicate document id: {0}")]
    DuplicateId(String),
    #[error("unknown document id: {0}")]
    UnknownDocument(String),
    #[error("invalid BM25 parameters: k1 must be > 0 and b in [0, 1]")]
    InvalidParams,
    #[error("corpus directory error: {0}")]
    Io(#[from] std::io::Error),
}

/// One searchable document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
}

/// Standard BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrieverError> {
        if !self.k1.is_finite() || self.k1 <= 0.0 || !self.b.is_finite() || !(0.0..=1.0).contains(&self.b) {
            return Err(RetrieverError::InvalidParams);
        }
        Ok(())
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DocEntry {
    id: String,
    title: String,
    body: String,
    /// Token count of title + body.
    length: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Posting {
    /// Index into the entries vector.
    doc: usize,
    /// Occurrences of the term in that document.
    tf: u32,
}

/// A scored retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDoc {
    pub doc_id: String,
    pub score: f64,
    /// First [`SNIPPET_CHAR_LIMIT`] characters of the document body.
    pub snippet: String,
}

/// Immutable inverted index with BM25 scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bm25Index {
    params: Bm25Params,
    entries: Vec<DocEntry>,
    /// term → postings sorted by ascending document position.
    postings: BTreeMap<String, Vec<Posting>>,
    avgdl: f64,
}

impl Bm25Index {
    /// Builds the index, tokenizing `title + body` of every document.
    pub fn build(corpus: &[Document], params: Bm25Params) -> Result<Self, RetrieverError> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(RetrieverError::EmptyCorpus);
        }
        let mut seen: HashSet<&str> = HashSet::new();
        for doc in corpus {
            if !seen.insert(&doc.id) {
                return Err(RetrieverError::DuplicateId(doc.id.clone()));
            }
        }
        let mut entries = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_length = 0usize;
        for (position, doc) in corpus.iter().enumerate() {
            let tokens = normalize_tokens(&format!("{} {}", doc.title, doc.body));
            total_length += tokens.len();
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens.iter() {
                *counts.entry(token.clone()).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { doc: position, tf });
            }
            entries.push(DocEntry {
                id: doc.id.clone(),
                title: doc.title.clone(),
                body: doc.body.clone(),
                length: tokens.len(),
            });
        }
        let avgdl = total_length as f64 / corpus.len() as f64;
        Ok(Bm25Index { params, entries, postings, avgdl })
    }

    pub fn doc_count(&self) -> usize {
        self.entries.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    /// Lucene-style idf of a term; 0 for terms absent from the corpus would
    /// still be positive under this formula, so absence is handled by the
    /// zero term frequency instead.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.document_frequency(term) as f64;
        let n = self.doc_count() as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_doc_score(&self, tf: u32, doc_length: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * doc_length as f64 / self.avgdl;
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one document for a tokenized query. Duplicate query
    /// tokens count once; terms absent from the document contribute zero.
    pub fn score(&self, query_tokens: &[String], doc_id: &str) -> Result<f64, RetrieverError> {
        let position = self
            .entries
            .iter()
            .position(|entry| entry.id == doc_id)
            .ok_or_else(|| RetrieverError::UnknownDocument(doc_id.to_string()))?;
        let mut total = 0.0;
        for term in distinct_in_order(query_tokens) {
            let Some(postings) = self.postings.get(term) else { continue };
            let Ok(slot) = postings.binary_search_by_key(&position, |p| p.doc) else { continue };
            total += self.idf(term) * self.term_doc_score(postings[slot].tf, self.entries[position].length);
        }
        Ok(total)
    }

    /// Top-`k` documents for a raw query string: descending score, ties by
    /// ascending document id, zero-score documents excluded.
    pub fn retrieve_top_k(&self, query: &str, k: usize) -> Vec<RetrievedDoc> {
        let query_tokens = normalize_tokens(query);
        let mut scores = vec![0.0f64; self.entries.len()];
        for term in distinct_in_order(&query_tokens) {
            let Some(postings) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for posting in postings {
                scores[posting.doc] += idf * self.term_doc_score(posting.tf, self.entries[posting.doc].length);
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, score)| *score > 0.0)
            .collect();
        ranked.sort_by(|(ia, sa), (ib, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.entries[*ia].id.cmp(&self.entries[*ib].id))
        });
        ranked
            .into_iter()
            .take(k)
            .map(|(position, score)| RetrievedDoc {
                doc_id: self.entries[position].id.clone(),
                score,
                snippet: truncate_chars(&self.entries[position].body, SNIPPET_CHAR_LIMIT),
            })
            .collect()
    }
}

/// Distinct tokens preserving first-occurrence order.
fn distinct_in_order(tokens: &[String]) -> Vec<&String> {
    let mut seen: HashSet<&String> = HashSet::new();
    tokens.iter().filter(|t| seen.insert(*t)).collect()
}

/// Loads a corpus from a directory of plain-text files: one document per
/// file, file name as id, first line as title, remainder as body. Files are
/// read in lexicographic name order so corpus construction is deterministic.
pub fn load_corpus_dir(path: impl AsRef<Path>) -> Result<Vec<Document>, RetrieverError> {
    let mut names: Vec<std::path::PathBuf> = std::fs::read_dir(path.as_ref())?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    let mut corpus = Vec::with_capacity(names.len());
    for file in names {
        let text = std::fs::read_to_string(&file)?;
        let id = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (title, body) = match text.split_once('\n') {
            Some((first, rest)) => (first.trim().to_string(), rest.trim().to_string()),
            None => (text.trim().to_string(), String::new()),
        };
        corpus.push(Document { id, title, body });
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, title: &str, body: &str) -> Document {
        Document { id: id.into(), title: title.into(), body: body.into() }
    }

    fn toy_corpus() -> Vec<Document> {
        vec![
            doc("a", "Paris", "Paris is the capital of France"),
            doc("b", "Berlin", "Berlin is the capital of Germany"),
            doc("c", "Rivers", "The Seine flows through Paris"),
        ]
    }

    /// Reference scorer written directly from the formula, independent of
    /// the inverted-index implementation.
    fn naive_bm25(corpus: &[Document], query: &str, doc_id: &str, params: Bm25Params) -> f64 {
        let tokenize = |d: &Document| normalize_tokens(&format!("{} {}", d.title, d.body));
        let n = corpus.len() as f64;
        let lengths: Vec<usize> = corpus.iter().map(|d| tokenize(d).len()).collect();
        let avgdl = lengths.iter().sum::<usize>() as f64 / n;
        let target = corpus.iter().position(|d| d.id == doc_id).unwrap();
        let target_tokens = tokenize(&corpus[target]);
        let mut seen = HashSet::new();
        let mut total = 0.0;
        for term in normalize_tokens(query) {
            if !seen.insert(term.clone()) {
                continue;
            }
            let df = corpus.iter().filter(|d| tokenize(d).contains(&term)).count() as f64;
            let tf = target_tokens.iter().filter(|t| **t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = 1.0 - params.b + params.b * lengths[target] as f64 / avgdl;
            total += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
        total
    }

    #[test]
    fn build_computes_corpus_statistics() {
        let index = Bm25Index::build(
            &[doc("only", "Tiny", "two token")],
            Bm25Params::default(),
        )
        .unwrap();
        // title + body tokenizes to [tiny, two, token].
        assert_eq!(index.doc_count(), 1);
        assert_eq!(index.avgdl(), 3.0);

        let index = Bm25Index::build(
            &[doc("x", "a b", ""), doc("y", "a b c d", "e f")],
            Bm25Params::default(),
        )
        .unwrap();
        assert_eq!(index.avgdl(), 4.0);
    }

    #[test]
    fn build_rejects_bad_corpora() {
        assert!(matches!(
            Bm25Index::build(&[], Bm25Params::default()),
            Err(RetrieverError::EmptyCorpus)
        ));
        let dup = vec![doc("same", "A", "x"), doc("same", "B", "y")];
        assert!(matches!(
            Bm25Index::build(&dup, Bm25Params::default()),
            Err(RetrieverError::DuplicateId(id)) if id == "same"
        ));
        assert!(Bm25Params { k1: 0.0, b: 0.75 }.validate().is_err());
        assert!(Bm25Params { k1: 1.5, b: 1.5 }.validate().is_err());
    }

    #[test]
    fn score_matches_naive_reference_on_toy_corpus() {
        let corpus = toy_corpus();
        let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
        let query_tokens = normalize_tokens("capital france");
        for d in &corpus {
            let fast = index.score(&query_tokens, &d.id).unwrap();
            let slow = naive_bm25(&corpus, "capital france", &d.id, Bm25Params::default());
            assert!((fast - slow).abs() < 1e-9, "doc {}: {} vs {}", d.id, fast, slow);
        }
    }

    #[test]
    fn absent_terms_and_empty_queries_score_zero() {
        let index = Bm25Index::build(&toy_corpus(), Bm25Params::default()).unwrap();
        assert_eq!(index.score(&normalize_tokens("zebra quantum"), "a").unwrap(), 0.0);
        assert_eq!(index.score(&[], "a").unwrap(), 0.0);
    }

    #[test]
    fn unknown_doc_id_is_an_error() {
        let index = Bm25Index::build(&toy_corpus(), Bm25Params::default()).unwrap();
        assert!(matches!(
            index.score(&normalize_tokens("paris"), "nope"),
            Err(RetrieverError::UnknownDocument(_))
        ));
    }

    #[test]
    fn duplicate_query_tokens_count_once() {
        let index = Bm25Index::build(&toy_corpus(), Bm25Params::default()).unwrap();
        let once = index.score(&normalize_tokens("capital"), "a").unwrap();
        let thrice = index.score(&normalize_tokens("capital capital capital"), "a").unwrap();
        assert_eq!(once, thrice);
    }

    #[test]
    fn top_k_ranking_and_exclusions() {
        let index = Bm25Index::build(&toy_corpus(), Bm25Params::default()).unwrap();
        let hits = index.retrieve_top_k("capital of france", 10);
        // Document c contains neither "capital" nor "france"; it only shares
        // the stopword-free "of"... which it lacks too — so only a and b hit.
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].doc_id, "a");
        assert!(hits[0].score > hits[1].score);
        assert!(index.retrieve_top_k("zebra", 5).is_empty());
        assert_eq!(index.retrieve_top_k("paris", 1).len(), 1);
    }

    #[test]
    fn ties_break_by_ascending_doc_id() {
        let corpus = vec![
            doc("zed", "same text here", ""),
            doc("abc", "same text here", ""),
        ];
        let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
        let hits = index.retrieve_top_k("same text", 2);
        assert_eq!(hits[0].doc_id, "abc");
        assert_eq!(hits[1].doc_id, "zed");
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn snippet_is_truncated_body() {
        let long_body = "x".repeat(SNIPPET_CHAR_LIMIT + 100);
        let corpus = vec![doc("long", "needle", &long_body)];
        let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
        let hits = index.retrieve_top_k("needle", 1);
        assert_eq!(hits[0].snippet.chars().count(), SNIPPET_CHAR_LIMIT);
    }

    #[test]
    fn idf_decreases_with_document_frequency() {
        let corpus = vec![
            doc("1", "apple banana", ""),
            doc("2", "apple cherry", ""),
            doc("3", "apple banana date", ""),
        ];
        let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
        let idf_rare = index.idf("date"); // df 1
        let idf_mid = index.idf("banana"); // df 2
        let idf_common = index.idf("apple"); // df 3
        assert!(idf_rare > idf_mid && idf_mid > idf_common);
        assert!(idf_common > 0.0);
    }

    #[test]
    fn corpus_dir_loading() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("beta.txt"), "Beta Title\nBody of beta.").unwrap();
        std::fs::write(dir.path().join("alpha.txt"), "Alpha Title\nBody of alpha.\nMore body.")
            .unwrap();
        let corpus = load_corpus_dir(dir.path()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].id, "alpha.txt");
        assert_eq!(corpus[0].title, "Alpha Title");
        assert_eq!(corpus[0].body, "Body of alpha.\nMore body.");
        assert_eq!(corpus[1].id, "beta.txt");
    }

    #[test]
    fn index_serializes_round_trip() {
        let index = Bm25Index::build(&toy_corpus(), Bm25Params::default()).unwrap();
        let json = serde_json::to_string(&index).unwrap();
        let back: Bm25Index = serde_json::from_str(&json).unwrap();
        assert_eq!(back.doc_count(), 3);
        let tokens = normalize_tokens("capital france");
        assert_eq!(back.score(&tokens, "a").unwrap(), index.score(&tokens, "a").unwrap());
    }

    prop_compose! {
        fn arb_corpus()(docs in proptest::collection::vec("[a-e ]{1,30}", 1..20)) -> Vec<Document> {
            docs.into_iter().enumerate().map(|(i, body)| Document {
                id: format!("d{i:02}"),
                title: format!("title {i}"),
                body,
            }).collect()
        }
    }

    proptest! {
        #[test]
        fn top_k_equals_exhaustive_scoring(corpus in arb_corpus(), query in "[a-e ]{1,15}") {
            let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
            let hits = index.retrieve_top_k(&query, corpus.len());
            // Exhaustive reference ranking via the public scorer.
            let tokens = normalize_tokens(&query);
            let mut reference: Vec<(String, f64)> = corpus.iter()
                .map(|d| (d.id.clone(), index.score(&tokens, &d.id).unwrap()))
                .filter(|(_, s)| *s > 0.0)
                .collect();
            reference.sort_by(|(ia, sa), (ib, sb)| {
                sb.partial_cmp(sa).unwrap().then_with(|| ia.cmp(ib))
            });
            let got: Vec<(String, f64)> = hits.into_iter().map(|h| (h.doc_id, h.score)).collect();
            prop_assert_eq!(got.len(), reference.len());
            for (g, r) in got.iter().zip(reference.iter()) {
                prop_assert_eq!(&g.0, &r.0);
                prop_assert!((g.1 - r.1).abs() < 1e-9);
            }
        }

        #[test]
        fn scores_are_non_negative(corpus in arb_corpus(), query in "[a-g ]{0,20}") {
            let index = Bm25Index::build(&corpus, Bm25Params::default()).unwrap();
            let tokens = normalize_tokens(&query);
            for d in &corpus {
                prop_assert!(index.score(&tokens, &d.id).unwrap() >= 0.0);
            }
        }
    }
}
