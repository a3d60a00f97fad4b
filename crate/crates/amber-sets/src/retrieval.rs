//! Built-in sparse lexical retrieval and loading of external rankings.
//!
//! Scoring is classic tf-idf with cosine similarity:
//!
//! * tokens are maximal alphanumeric runs, lowercased
//! * term frequency is the raw in-document count
//! * `idf(t) = ln((N + 1) / (df(t) + 1)) + 1` over the N corpus documents
//! * document and query vectors hold `tf * idf` weights, L2-normalized
//! * the score is the dot product; query terms absent from the corpus
//!   vocabulary are dropped before weighting
//!
//! Every document receives a score, so rankings are total. Ties, including
//! the all-zero ranking of a fully out-of-vocabulary query, break by
//! ascending doc_id.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentIndex;
use crate::error::{io_err, Error, Result};
use crate::queries::TaskQuery;

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// One scored document.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    /// Document identifier.
    pub doc_id: String,
    /// Cosine similarity to the query.
    pub score: f64,
}

/// Inverted tf-idf index over a corpus.
#[derive(Debug, Clone)]
pub struct SparseIndex {
    doc_ids: Vec<String>,
    idf: BTreeMap<String, f64>,
    postings: BTreeMap<String, Vec<(u32, f64)>>,
}

impl SparseIndex {
    /// Index a corpus. An empty corpus cannot be searched and is rejected.
    pub fn build(corpus: &DocumentIndex) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Validation("cannot index an empty corpus".into()));
        }
        let docs: Vec<_> = corpus.iter().collect();
        let counts: Vec<BTreeMap<String, usize>> = docs
            .par_iter()
            .map(|doc| {
                let mut c: BTreeMap<String, usize> = BTreeMap::new();
                for token in tokenize(&doc.text) {
                    *c.entry(token).or_insert(0) += 1;
                }
                c
            })
            .collect();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(term, df)| (term.to_string(), ((n + 1.0) / (df as f64 + 1.0)).ln() + 1.0))
            .collect();

        let mut postings: BTreeMap<String, Vec<(u32, f64)>> = BTreeMap::new();
        for (index, c) in counts.iter().enumerate() {
            let weights: BTreeMap<&str, f64> = c
                .iter()
                .map(|(term, tf)| (term.as_str(), *tf as f64 * idf[term.as_str()]))
                .collect();
            let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for (term, w) in weights {
                postings
                    .entry(term.to_string())
                    .or_default()
                    .push((index as u32, w / norm));
            }
        }

        Ok(SparseIndex {
            doc_ids: docs.into_iter().map(|d| d.doc_id.clone()).collect(),
            idf,
            postings,
        })
    }

    /// Number of indexed documents.
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    /// Number of distinct terms.
    pub fn vocab_size(&self) -> usize {
        self.idf.len()
    }

    /// Inverse document frequency of a term, if indexed.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.idf.get(term).copied()
    }

    /// Cosine score of every document against the query, in doc order.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for token in tokenize(query) {
            if self.idf.contains_key(&token) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let weights: BTreeMap<&str, f64> = counts
            .iter()
            .map(|(term, tf)| (term.as_str(), *tf as f64 * self.idf[term.as_str()]))
            .collect();
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        let mut scores = vec![0.0; self.doc_ids.len()];
        if norm == 0.0 {
            return scores;
        }
        for (term, w) in weights {
            for (index, doc_weight) in &self.postings[term] {
                scores[*index as usize] += (w / norm) * doc_weight;
            }
        }
        scores
    }

    /// Top `k` documents: score descending, doc_id ascending on ties.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
        let scores = self.score_all(query);
        let mut order: Vec<usize> = (0..self.doc_ids.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| self.doc_ids[a].cmp(&self.doc_ids[b]))
        });
        order
            .into_iter()
            .take(k)
            .map(|i| ScoredDoc {
                doc_id: self.doc_ids[i].clone(),
                score: scores[i],
            })
            .collect()
    }
}

/// A retriever's rankings for a batch of queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrieverRun {
    /// Short name used in reports.
    pub run_id: String,
    /// Ranked doc_ids per query, best first.
    pub rankings: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RunLineWire {
    query_id: String,
    ranked_doc_ids: Vec<String>,
}

impl RetrieverRun {
    /// Rankings for one query, best first.
    pub fn ranking(&self, query_id: &str) -> Option<&[String]> {
        self.rankings.get(query_id).map(Vec::as_slice)
    }

    /// Write one JSON object per query, in query_id order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        for (query_id, ranked_doc_ids) in &self.rankings {
            let wire = RunLineWire {
                query_id: query_id.clone(),
                ranked_doc_ids: ranked_doc_ids.clone(),
            };
            serde_json::to_writer(&mut w, &wire)
                .map_err(|e| Error::Validation(format!("cannot serialize ranking: {e}")))?;
            w.write_all(b"\n").map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    /// Load a run file, checking that every ranking answers a known query
    /// exactly once and never repeats a document.
    pub fn load(path: &Path, run_id: &str, known_queries: &BTreeSet<String>) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut rankings = BTreeMap::new();
        let mut unknown = BTreeSet::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let wire: RunLineWire = serde_json::from_str(&line).map_err(|e| {
                Error::parse(i + 1, format!("bad run record: {e}")).with_path(path)
            })?;
            if !known_queries.contains(&wire.query_id) {
                unknown.insert(wire.query_id.clone());
                continue;
            }
            let mut seen = BTreeSet::new();
            for doc in &wire.ranked_doc_ids {
                if !seen.insert(doc) {
                    return Err(Error::Validation(format!(
                        "{}: ranking for {} lists {doc} twice",
                        path.display(),
                        wire.query_id
                    )));
                }
            }
            if rankings
                .insert(wire.query_id.clone(), wire.ranked_doc_ids)
                .is_some()
            {
                return Err(Error::Validation(format!(
                    "{}: duplicate ranking for {}",
                    path.display(),
                    wire.query_id
                )));
            }
        }
        if !unknown.is_empty() {
            let shown: Vec<&str> = unknown.iter().take(5).map(String::as_str).collect();
            return Err(Error::Validation(format!(
                "{}: {} rankings answer unknown queries, first: {}",
                path.display(),
                unknown.len(),
                shown.join(", ")
            )));
        }
        Ok(RetrieverRun {
            run_id: run_id.to_string(),
            rankings,
        })
    }
}

/// Rank the corpus for every query with the built-in scorer.
pub fn batch_retrieve(
    index: &SparseIndex,
    queries: &[TaskQuery],
    k: usize,
    run_id: &str,
) -> RetrieverRun {
    let rankings: Vec<(String, Vec<String>)> = queries
        .par_iter()
        .map(|q| {
            let ranked = index
                .retrieve(&q.input, k)
                .into_iter()
                .map(|s| s.doc_id)
                .collect();
            (q.query_id.clone(), ranked)
        })
        .collect();
    RetrieverRun {
        run_id: run_id.to_string(),
        rankings: rankings.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocumentRecord;
    use proptest::prelude::*;

    const TOLERANCE: f64 = 1e-9;

    fn corpus(docs: &[(&str, &str)]) -> DocumentIndex {
        let mut index = DocumentIndex::default();
        for (doc_id, text) in docs {
            index
                .insert(DocumentRecord {
                    doc_id: doc_id.to_string(),
                    title: doc_id.to_string(),
                    qid: None,
                    text: text.to_string(),
                })
                .unwrap();
        }
        index
    }

    fn five_doc_index() -> SparseIndex {
        SparseIndex::build(&corpus(&[
            ("d1", "the quick brown fox jumps over the lazy dog"),
            ("d2", "rugby is a sport played with an oval ball"),
            ("d3", "the piano is a musical instrument with keys"),
            ("d4", "napoleon fought many wars in europe"),
            ("d5", "the fiji national rugby team plays rugby"),
        ]))
        .unwrap()
    }

    #[test]
    fn tokenize_lowercases_alphanumeric_runs() {
        assert_eq!(tokenize("The quick-brown FOX!"), vec!["the", "quick", "brown", "fox"]);
        assert_eq!(tokenize("R2D2, meet C3PO."), vec!["r2d2", "meet", "c3po"]);
        assert_eq!(tokenize("Café Ñandú"), vec!["café", "ñandú"]);
        assert_eq!(tokenize("  ...  "), Vec::<String>::new());
    }

    #[test]
    fn known_scores_for_a_two_term_query() {
        let index = five_doc_index();
        let results = index.retrieve("rugby sport", 5);
        assert_eq!(results[0].doc_id, "d2");
        assert!((results[0].score - 0.46596256891006016).abs() < TOLERANCE);
        assert_eq!(results[1].doc_id, "d5");
        assert!((results[1].score - 0.3815319074583266).abs() < TOLERANCE);
        for r in &results[2..] {
            assert_eq!(r.score, 0.0);
        }
        assert_eq!(
            results[2..].iter().map(|r| r.doc_id.as_str()).collect::<Vec<_>>(),
            vec!["d1", "d3", "d4"],
            "zero scores rank by doc_id"
        );
    }

    #[test]
    fn known_score_for_a_single_term_query() {
        let index = five_doc_index();
        let results = index.retrieve("piano", 1);
        assert_eq!(results[0].doc_id, "d3");
        assert!((results[0].score - 0.3952457425281075).abs() < TOLERANCE);
    }

    #[test]
    fn known_score_for_disjoint_vocabularies() {
        let index = SparseIndex::build(&corpus(&[
            ("a", "alpha beta gamma"),
            ("b", "delta epsilon zeta"),
            ("c", "eta theta iota"),
        ]))
        .unwrap();
        let results = index.retrieve("delta zeta", 3);
        assert_eq!(results[0].doc_id, "b");
        assert!((results[0].score - 0.816496580927726).abs() < TOLERANCE);
        assert_eq!(results[1].score, 0.0);
        assert_eq!(results[2].score, 0.0);
    }

    #[test]
    fn out_of_vocabulary_query_ranks_by_doc_id() {
        let index = five_doc_index();
        let results = index.retrieve("xylophone zeppelin", 3);
        assert_eq!(results.len(), 3);
        assert!(results.iter().all(|r| r.score == 0.0));
        assert_eq!(
            results.iter().map(|r| r.doc_id.as_str()).collect::<Vec<_>>(),
            vec!["d1", "d2", "d3"]
        );
    }

    #[test]
    fn mixed_query_drops_unknown_terms() {
        let index = five_doc_index();
        let with_noise = index.retrieve("piano xylophone", 5);
        let clean = index.retrieve("piano", 5);
        assert_eq!(with_noise, clean);
    }

    #[test]
    fn k_bounds() {
        let index = five_doc_index();
        assert_eq!(index.retrieve("rugby", 100).len(), 5, "k larger than corpus");
        assert!(index.retrieve("rugby", 0).is_empty());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(SparseIndex::build(&DocumentIndex::default()).is_err());
    }

    #[test]
    fn identical_docs_tie_in_id_order() {
        let index = SparseIndex::build(&corpus(&[
            ("z_copy", "rugby rugby rugby"),
            ("a_copy", "rugby rugby rugby"),
        ]))
        .unwrap();
        let results = index.retrieve("rugby", 2);
        assert_eq!(results[0].doc_id, "a_copy");
        assert_eq!(results[1].doc_id, "z_copy");
        assert_eq!(results[0].score, results[1].score);
    }

    #[test]
    fn run_round_trip_and_validation() {
        let run = RetrieverRun {
            run_id: "test".into(),
            rankings: [
                ("q1".to_string(), vec!["d1".to_string(), "d2".to_string()]),
                ("q2".to_string(), vec!["d3".to_string()]),
            ]
            .into(),
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        run.write(file.path()).unwrap();
        let known: BTreeSet<String> = ["q1".to_string(), "q2".to_string()].into();
        let loaded = RetrieverRun::load(file.path(), "test", &known).unwrap();
        assert_eq!(loaded, run);

        let narrow: BTreeSet<String> = ["q1".to_string()].into();
        let err = RetrieverRun::load(file.path(), "test", &narrow).unwrap_err();
        assert!(err.to_string().contains("q2"), "got: {err}");
    }

    #[test]
    fn run_load_rejects_duplicate_docs_and_queries() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write as _;
        writeln!(file, r#"{{"query_id":"q1","ranked_doc_ids":["d1","d1"]}}"#).unwrap();
        let known: BTreeSet<String> = ["q1".to_string()].into();
        assert!(RetrieverRun::load(file.path(), "t", &known).is_err());

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, r#"{{"query_id":"q1","ranked_doc_ids":["d1"]}}"#).unwrap();
        writeln!(file, r#"{{"query_id":"q1","ranked_doc_ids":["d2"]}}"#).unwrap();
        assert!(RetrieverRun::load(file.path(), "t", &known).is_err());
    }

    /// Reference scorer: full normalized vectors, no inverted index.
    fn brute_force_scores(docs: &[(&str, &str)], query: &str) -> Vec<f64> {
        let n = docs.len() as f64;
        let counts: Vec<BTreeMap<String, usize>> = docs
            .iter()
            .map(|(_, text)| {
                let mut c: BTreeMap<String, usize> = BTreeMap::new();
                for t in tokenize(text) {
                    *c.entry(t).or_insert(0) += 1;
                }
                c
            })
            .collect();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let normalize = |c: &BTreeMap<String, usize>| -> BTreeMap<String, f64> {
            let weights: BTreeMap<String, f64> = c
                .iter()
                .filter_map(|(t, tf)| {
                    df.get(t).map(|d| {
                        let idf = ((n + 1.0) / (*d as f64 + 1.0)).ln() + 1.0;
                        (t.clone(), *tf as f64 * idf)
                    })
                })
                .collect();
            let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm == 0.0 {
                BTreeMap::new()
            } else {
                weights.into_iter().map(|(t, w)| (t, w / norm)).collect()
            }
        };

        let mut qcounts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokenize(query) {
            if df.contains_key(&t) {
                *qcounts.entry(t).or_insert(0) += 1;
            }
        }
        let qvec = normalize(&qcounts);
        counts
            .iter()
            .map(|c| {
                let dvec = normalize(c);
                qvec.iter()
                    .map(|(t, qw)| qw * dvec.get(t).copied().unwrap_or(0.0))
                    .sum()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            texts in proptest::collection::vec(
                proptest::collection::vec(
                    proptest::sample::select(vec!["alpha", "beta", "gamma", "delta", "rugby"]),
                    1..6,
                ),
                1..6,
            ),
            query in proptest::collection::vec(
                proptest::sample::select(vec!["alpha", "beta", "gamma", "piano"]),
                1..4,
            ),
        ) {
            let docs: Vec<(String, String)> = texts
                .iter()
                .enumerate()
                .map(|(i, tokens)| (format!("d{i:02}"), tokens.join(" ")))
                .collect();
            let borrowed: Vec<(&str, &str)> =
                docs.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
            let index = SparseIndex::build(&corpus(&borrowed)).unwrap();
            let query = query.join(" ");
            let expected = brute_force_scores(&borrowed, &query);
            let got = index.score_all(&query);
            prop_assert_eq!(got.len(), expected.len());
            for (g, e) in got.iter().zip(&expected) {
                prop_assert!((g - e).abs() < 1e-12, "got {} expected {}", g, e);
            }
        }

        #[test]
        fn scores_are_cosines(
            texts in proptest::collection::vec(
                proptest::collection::vec(
                    proptest::sample::select(vec!["alpha", "beta", "gamma"]),
                    1..5,
                ),
                1..5,
            ),
        ) {
            let docs: Vec<(String, String)> = texts
                .iter()
                .enumerate()
                .map(|(i, tokens)| (format!("d{i}"), tokens.join(" ")))
                .collect();
            let borrowed: Vec<(&str, &str)> =
                docs.iter().map(|(i, t)| (i.as_str(), t.as_str())).collect();
            let index = SparseIndex::build(&corpus(&borrowed)).unwrap();
            for (_, text) in &borrowed {
                for score in index.score_all(text) {
                    prop_assert!((-1e-9..=1.0 + 1e-9).contains(&score));
                }
            }
        }
    }
}
