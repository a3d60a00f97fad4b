//! Disambiguation metrics over retriever rankings.
//!
//! For each task the report carries, per cutoff:
//!
//! * retrieval accuracy, split into all, head, and tail queries: a query
//!   counts when any of its gold documents ranks within the top k
//! * all-correct rate: the share of sets whose every query in the split
//!   was answered; sets with no queries in the split sit out
//! * entity confusion: how often a document about a different member of
//!   the same set outranks every gold document, judged on full rankings
//!
//! A popularity-gap table then compares head and tail accuracy at rank
//! one, pairing each head with each of its tails and binning the pair by
//! their popularity gap. Both sides of a pair must have queries for the
//! task, or the pair is left out.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::popularity::{bin_index, default_gap_bins};
use crate::queries::{GeneratedQueries, Task, TaskQuery};
use crate::retrieval::RetrieverRun;
use crate::sets::AmberSet;

/// Default ranking cutoff.
pub const DEFAULT_K: usize = 20;

/// A ratio that keeps its numerator and denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frac {
    /// Numerator.
    pub hits: usize,
    /// Denominator.
    pub total: usize,
    /// `hits / total`, or zero when the denominator is zero.
    pub value: f64,
}

impl Frac {
    /// Build a ratio, mapping an empty denominator to zero.
    pub fn new(hits: usize, total: usize) -> Frac {
        Frac {
            hits,
            total,
            value: if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            },
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    hits: usize,
    total: usize,
}

impl Tally {
    fn add(&mut self, hit: bool) {
        self.hits += usize::from(hit);
        self.total += 1;
    }

    fn merge(&mut self, other: Tally) {
        self.hits += other.hits;
        self.total += other.total;
    }

    fn frac(self) -> Frac {
        Frac::new(self.hits, self.total)
    }
}

/// Accuracy at one cutoff, across the three query splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// Ranking cutoff.
    pub k: usize,
    /// Every query.
    pub all: Frac,
    /// Head-entity queries.
    pub head: Frac,
    /// Tail-entity queries.
    pub tail: Frac,
    /// Sets whose every query in scope was answered within the cutoff.
    pub all_correct: Frac,
}

/// Entity-confusion rates across the three query splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    /// Every query.
    pub all: Frac,
    /// Head-entity queries.
    pub head: Frac,
    /// Tail-entity queries.
    pub tail: Frac,
}

/// Metrics for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    /// Queries evaluated.
    pub queries: usize,
    /// One row per cutoff, ascending.
    pub accuracy: Vec<AccuracyRow>,
    /// Confusion rates over full rankings.
    pub confusion: ConfusionRow,
}

/// Head-versus-tail accuracy at rank one for pairs in one gap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapBinRow {
    /// Interval label.
    pub label: String,
    /// Inclusive lower gap bound.
    pub lower: f64,
    /// Exclusive upper gap bound; absent for the top bin.
    pub upper: Option<f64>,
    /// Head-side accuracy at rank one.
    pub head: Frac,
    /// Tail-side accuracy at rank one.
    pub tail: Frac,
    /// `head.value - tail.value`.
    pub diff: f64,
    /// Head-tail pairs contributing.
    pub support: usize,
}

/// Everything a run evaluation produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// The evaluated run.
    pub run_id: String,
    /// Configured cutoff.
    pub k: usize,
    /// Per-task metrics, keyed by task tag.
    pub tasks: BTreeMap<String, TaskMetrics>,
    /// Per-task gap tables, keyed by task tag.
    pub gap_bins: BTreeMap<String, Vec<GapBinRow>>,
    /// Non-fatal observations made during evaluation.
    pub warnings: Vec<String>,
}

/// Evaluation options.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Ranking cutoff for the accuracy table.
    pub k: usize,
    /// Fail on queries the run does not answer instead of scoring a miss.
    pub strict: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: DEFAULT_K,
            strict: false,
        }
    }
}

struct Outcome {
    set_id: String,
    qid: String,
    is_head: bool,
    /// Hit flags aligned with the cutoff list.
    hits: Vec<bool>,
    confused: bool,
    missing: bool,
}

fn judge(
    query: &TaskQuery,
    ranking: Option<&[String]>,
    ks: &[usize],
    other_docs: Option<&BTreeSet<String>>,
) -> Outcome {
    let Some(ranking) = ranking else {
        return Outcome {
            set_id: query.set_id.clone(),
            qid: query.qid.clone(),
            is_head: query.is_head,
            hits: vec![false; ks.len()],
            confused: false,
            missing: true,
        };
    };
    let mut gold_rank = usize::MAX;
    let mut other_rank = usize::MAX;
    for (rank, doc) in ranking.iter().enumerate() {
        if gold_rank == usize::MAX && query.gold_doc_ids.contains(doc) {
            gold_rank = rank;
        }
        if other_rank == usize::MAX && other_docs.is_some_and(|docs| docs.contains(doc)) {
            other_rank = rank;
        }
        if gold_rank != usize::MAX && other_rank != usize::MAX {
            break;
        }
    }
    Outcome {
        set_id: query.set_id.clone(),
        qid: query.qid.clone(),
        is_head: query.is_head,
        hits: ks.iter().map(|k| gold_rank < *k).collect(),
        confused: other_rank < gold_rank,
        missing: false,
    }
}

/// Score a run against the sets and queries it was produced for.
pub fn evaluate(
    sets: &[AmberSet],
    queries: &GeneratedQueries,
    run: &RetrieverRun,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if options.k == 0 {
        return Err(Error::Config("cutoff k must be at least 1".into()));
    }
    let ks: Vec<usize> = if options.k == 1 {
        vec![1]
    } else {
        vec![1, options.k]
    };

    let sets_by_id: BTreeMap<&str, &AmberSet> =
        sets.iter().map(|s| (s.set_id.as_str(), s)).collect();
    // Documents about the *other* members of a query's set.
    let mut other_docs: BTreeMap<(&str, &str), BTreeSet<String>> = BTreeMap::new();
    for set in sets {
        for qid in set.members.keys() {
            let union: BTreeSet<String> = set
                .entity_docs
                .iter()
                .filter(|(member, _)| *member != qid)
                .flat_map(|(_, docs)| docs.iter().cloned())
                .collect();
            other_docs.insert((set.set_id.as_str(), qid.as_str()), union);
        }
    }

    let mut warnings = Vec::new();
    let mut missing: BTreeSet<String> = BTreeSet::new();
    let mut tasks = BTreeMap::new();
    let mut gap_tables = BTreeMap::new();

    for task in Task::ALL {
        let task_queries: &[TaskQuery] = match task {
            Task::Qa => &queries.qa,
            Task::Sf => &queries.sf,
            Task::Fc => &queries.fc,
        };
        let outcomes: Vec<Outcome> = task_queries
            .par_iter()
            .map(|q| {
                judge(
                    q,
                    run.ranking(&q.query_id),
                    &ks,
                    other_docs.get(&(q.set_id.as_str(), q.qid.as_str())),
                )
            })
            .collect();

        for (query, outcome) in task_queries.iter().zip(&outcomes) {
            if outcome.missing {
                missing.insert(query.query_id.clone());
            }
        }

        let mut accuracy = Vec::new();
        for (ki, k) in ks.iter().enumerate() {
            let mut all = Tally::default();
            let mut head = Tally::default();
            let mut tail = Tally::default();
            // Per-set conjunction of hits, per split.
            let mut set_all: BTreeMap<&str, bool> = BTreeMap::new();
            for outcome in &outcomes {
                let hit = outcome.hits[ki];
                all.add(hit);
                if outcome.is_head {
                    head.add(hit);
                } else {
                    tail.add(hit);
                }
                set_all
                    .entry(outcome.set_id.as_str())
                    .and_modify(|ok| *ok &= hit)
                    .or_insert(hit);
            }
            let all_correct = Tally {
                hits: set_all.values().filter(|ok| **ok).count(),
                total: set_all.len(),
            };
            accuracy.push(AccuracyRow {
                k: *k,
                all: all.frac(),
                head: head.frac(),
                tail: tail.frac(),
                all_correct: all_correct.frac(),
            });
        }

        let mut confusion = (Tally::default(), Tally::default(), Tally::default());
        for outcome in &outcomes {
            confusion.0.add(outcome.confused);
            if outcome.is_head {
                confusion.1.add(outcome.confused);
            } else {
                confusion.2.add(outcome.confused);
            }
        }

        // Rank-one accuracy per member entity, for the gap table.
        let mut per_entity: BTreeMap<(&str, &str), Tally> = BTreeMap::new();
        for outcome in &outcomes {
            per_entity
                .entry((outcome.set_id.as_str(), outcome.qid.as_str()))
                .or_default()
                .add(outcome.hits[0]);
        }
        let bins = default_gap_bins();
        let mut bin_heads = vec![Tally::default(); bins.len()];
        let mut bin_tails = vec![Tally::default(); bins.len()];
        let mut bin_support = vec![0usize; bins.len()];
        for (set_id, set) in &sets_by_id {
            let Some(head_tally) = per_entity.get(&(*set_id, set.head_qid.as_str())) else {
                continue;
            };
            for tail_qid in &set.tail_qids {
                let Some(tail_tally) = per_entity.get(&(*set_id, tail_qid.as_str())) else {
                    continue;
                };
                let Some(gap) = set.gap_to(tail_qid) else {
                    warnings.push(format!(
                        "set {set_id}: views are inconsistent with the head choice, \
                         pair with {tail_qid} left out of the gap table"
                    ));
                    continue;
                };
                let Some(bin) = bin_index(&bins, gap) else {
                    continue;
                };
                bin_heads[bin].merge(*head_tally);
                bin_tails[bin].merge(*tail_tally);
                bin_support[bin] += 1;
            }
        }
        let rows: Vec<GapBinRow> = bins
            .iter()
            .enumerate()
            .map(|(i, bin)| {
                let head = bin_heads[i].frac();
                let tail = bin_tails[i].frac();
                GapBinRow {
                    label: bin.label.clone(),
                    lower: bin.lower,
                    upper: bin.upper,
                    diff: if bin_support[i] == 0 {
                        0.0
                    } else {
                        head.value - tail.value
                    },
                    head,
                    tail,
                    support: bin_support[i],
                }
            })
            .collect();

        tasks.insert(
            task.to_string(),
            TaskMetrics {
                queries: task_queries.len(),
                accuracy,
                confusion: ConfusionRow {
                    all: confusion.0.frac(),
                    head: confusion.1.frac(),
                    tail: confusion.2.frac(),
                },
            },
        );
        gap_tables.insert(task.to_string(), rows);
    }

    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).map(String::as_str).collect();
        let note = format!(
            "run {}: {} queries have no ranking and score as misses, first: {}",
            run.run_id,
            missing.len(),
            shown.join(", ")
        );
        if options.strict {
            return Err(Error::Validation(note));
        }
        warnings.push(note);
    }

    Ok(MetricsReport {
        run_id: run.run_id.clone(),
        k: options.k,
        tasks,
        gap_bins: gap_tables,
        warnings,
    })
}

/// Write a report as pretty-printed JSON.
pub fn write_report(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Validation(format!("cannot serialize report: {e}")))?;
    file.write_all(json.as_bytes())
        .and_then(|()| file.write_all(b"\n"))
        .map_err(|e| io_err(path, e))
}

/// Read a report back.
pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(1, format!("bad report: {e}")).with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_member_set() -> AmberSet {
        serde_json::from_value(serde_json::json!({
            "set_id": "d69a391c612de904",
            "collection": "human",
            "name": "Abe Lincoln",
            "head_qid": "Q91",
            "tail_qids": ["Q4666410"],
            "views": {"Q91": 250000, "Q4666410": 500},
            "members": {
                "Q91": [{
                    "subject_qid": "Q91", "pid": "P607",
                    "property_label": "conflict", "value_text": "Black Hawk War"
                }],
                "Q4666410": [{
                    "subject_qid": "Q4666410", "pid": "P1303",
                    "property_label": "instrument", "value_text": "trombone"
                }]
            },
            "gold_docs": {
                "Q91": {"P607": ["D_head"]},
                "Q4666410": {"P1303": ["D_tail"]}
            },
            "entity_docs": {
                "Q91": ["D_head", "D_head_extra"],
                "Q4666410": ["D_tail"]
            }
        }))
        .unwrap()
    }

    fn query(set: &AmberSet, qid: &str, pid: &str, task: Task) -> TaskQuery {
        TaskQuery {
            query_id: format!("{}:{qid}:{pid}:{task}", set.set_id),
            set_id: set.set_id.clone(),
            qid: qid.to_string(),
            pid: pid.to_string(),
            task,
            input: "who?".into(),
            answer: "x".into(),
            gold_doc_ids: set.gold_docs[qid][pid].clone(),
            is_head: set.is_head(qid),
        }
    }

    fn run(rankings: &[(&str, &[&str])]) -> RetrieverRun {
        RetrieverRun {
            run_id: "test".into(),
            rankings: rankings
                .iter()
                .map(|(q, docs)| {
                    (
                        q.to_string(),
                        docs.iter().map(|d| d.to_string()).collect(),
                    )
                })
                .collect(),
        }
    }

    fn scenario() -> (AmberSet, GeneratedQueries) {
        let set = two_member_set();
        let queries = GeneratedQueries {
            qa: vec![
                query(&set, "Q91", "P607", Task::Qa),
                query(&set, "Q4666410", "P1303", Task::Qa),
            ],
            ..GeneratedQueries::default()
        };
        (set, queries)
    }

    #[test]
    fn accuracy_and_confusion_splits() {
        let (set, queries) = scenario();
        let run = run(&[
            ("d69a391c612de904:Q91:P607:qa", &["D_head", "D_tail"]),
            ("d69a391c612de904:Q4666410:P1303:qa", &["D_head", "D_tail"]),
        ]);
        let report = evaluate(
            &[set],
            &queries,
            &run,
            &EvalOptions { k: 2, strict: true },
        )
        .unwrap();

        let qa = &report.tasks["qa"];
        assert_eq!(qa.queries, 2);
        let at1 = &qa.accuracy[0];
        assert_eq!(at1.k, 1);
        assert_eq!((at1.all.hits, at1.all.total), (1, 2));
        assert_eq!((at1.head.hits, at1.head.total), (1, 1));
        assert_eq!((at1.tail.hits, at1.tail.total), (0, 1));
        assert_eq!((at1.all_correct.hits, at1.all_correct.total), (0, 1));
        let at2 = &qa.accuracy[1];
        assert_eq!(at2.k, 2);
        assert_eq!((at2.all.hits, at2.all.total), (2, 2));
        assert_eq!((at2.all_correct.hits, at2.all_correct.total), (1, 1));

        // The tail query sees the head's document first: confused. The head
        // query sees its own gold first: not confused.
        assert_eq!((qa.confusion.all.hits, qa.confusion.all.total), (1, 2));
        assert_eq!(qa.confusion.head.hits, 0);
        assert_eq!(qa.confusion.tail.hits, 1);

        // Gap 499 lands in the unbounded bin.
        let top = report.gap_bins["qa"].last().unwrap();
        assert_eq!(top.label, "100%+");
        assert_eq!(top.support, 1);
        assert_eq!((top.head.hits, top.head.total), (1, 1));
        assert_eq!((top.tail.hits, top.tail.total), (0, 1));
        assert_eq!(top.diff, 1.0);
        for row in &report.gap_bins["qa"][..5] {
            assert_eq!(row.support, 0);
            assert_eq!(row.diff, 0.0);
        }
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn absent_documents_never_confuse() {
        let (set, queries) = scenario();
        // Head ranking misses gold and other docs alike; tail ranking has
        // gold late but no head documents.
        let run = run(&[
            ("d69a391c612de904:Q91:P607:qa", &["Other_1", "Other_2"]),
            ("d69a391c612de904:Q4666410:P1303:qa", &["Other_1", "D_tail"]),
        ]);
        let report = evaluate(&[set], &queries, &run, &EvalOptions { k: 2, strict: true }).unwrap();
        let qa = &report.tasks["qa"];
        assert_eq!(qa.confusion.all.hits, 0);
        assert_eq!(qa.accuracy[1].all.hits, 1);
    }

    #[test]
    fn confusion_counts_any_other_member_document() {
        let (set, queries) = scenario();
        // D_head_extra is about the head entity but is not gold for the
        // tail query; it still confuses the tail query.
        let run = run(&[
            ("d69a391c612de904:Q91:P607:qa", &["D_head"]),
            ("d69a391c612de904:Q4666410:P1303:qa", &["D_head_extra", "D_tail"]),
        ]);
        let report = evaluate(&[set], &queries, &run, &EvalOptions { k: 1, strict: true }).unwrap();
        assert_eq!(report.tasks["qa"].confusion.tail.hits, 1);
        assert_eq!(report.tasks["qa"].accuracy.len(), 1, "k = 1 yields one row");
    }

    #[test]
    fn missing_rankings_warn_or_fail() {
        let (set, queries) = scenario();
        let partial = run(&[("d69a391c612de904:Q91:P607:qa", &["D_head"])]);
        let report = evaluate(
            std::slice::from_ref(&set),
            &queries,
            &partial,
            &EvalOptions { k: 2, strict: false },
        )
        .unwrap();
        assert_eq!(report.tasks["qa"].accuracy[0].all.total, 2);
        assert_eq!(report.tasks["qa"].accuracy[0].tail.hits, 0);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("P1303"), "got: {}", report.warnings[0]);

        let err = evaluate(&[set], &queries, &partial, &EvalOptions { k: 2, strict: true });
        assert!(err.is_err());
    }

    #[test]
    fn all_correct_skips_sets_without_queries_in_scope() {
        let set = two_member_set();
        let mut other = two_member_set();
        other.set_id = "aaaaaaaaaaaaaaaa".into();
        // Only the first set has fc queries.
        let queries = GeneratedQueries {
            fc: vec![query(&set, "Q91", "P607", Task::Fc)],
            ..GeneratedQueries::default()
        };
        let run = run(&[("d69a391c612de904:Q91:P607:fc", &["D_head"])]);
        let report = evaluate(
            &[set, other],
            &queries,
            &run,
            &EvalOptions { k: 1, strict: true },
        )
        .unwrap();
        let fc = &report.tasks["fc"];
        assert_eq!((fc.accuracy[0].all_correct.hits, fc.accuracy[0].all_correct.total), (1, 1));
        assert_eq!(report.tasks["qa"].queries, 0);
        assert_eq!(report.tasks["qa"].accuracy[0].all.total, 0);
        assert_eq!(report.tasks["qa"].accuracy[0].all.value, 0.0);
    }

    #[test]
    fn gap_pair_needs_queries_on_both_sides() {
        let set = two_member_set();
        let queries = GeneratedQueries {
            qa: vec![query(&set, "Q91", "P607", Task::Qa)],
            ..GeneratedQueries::default()
        };
        let run = run(&[("d69a391c612de904:Q91:P607:qa", &["D_head"])]);
        let report = evaluate(&[set], &queries, &run, &EvalOptions { k: 1, strict: true }).unwrap();
        assert!(report.gap_bins["qa"].iter().all(|row| row.support == 0));
    }

    #[test]
    fn inconsistent_views_leave_the_gap_table_with_a_warning() {
        let mut set = two_member_set();
        set.views.insert("Q91".into(), 10);
        set.views.insert("Q4666410".into(), 20);
        let queries = {
            let (_, queries) = scenario();
            queries
        };
        let run = run(&[
            ("d69a391c612de904:Q91:P607:qa", &["D_head"]),
            ("d69a391c612de904:Q4666410:P1303:qa", &["D_tail"]),
        ]);
        let report =
            evaluate(&[set], &queries, &run, &EvalOptions { k: 1, strict: true }).unwrap();
        assert!(report.gap_bins["qa"].iter().all(|row| row.support == 0));
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("inconsistent"));
    }

    #[test]
    fn report_round_trips_through_json() {
        let (set, queries) = scenario();
        let run = run(&[
            ("d69a391c612de904:Q91:P607:qa", &["D_head"]),
            ("d69a391c612de904:Q4666410:P1303:qa", &["D_tail"]),
        ]);
        let report =
            evaluate(&[set], &queries, &run, &EvalOptions { k: 2, strict: true }).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_report(file.path(), &report).unwrap();
        assert_eq!(read_report(file.path()).unwrap(), report);
    }

    #[test]
    fn zero_k_is_rejected() {
        let (set, queries) = scenario();
        let empty = run(&[]);
        assert!(evaluate(&[set], &queries, &empty, &EvalOptions { k: 0, strict: false }).is_err());
    }

    proptest! {
        #[test]
        fn split_tallies_are_consistent(
            rankings in proptest::collection::vec(
                proptest::sample::subsequence(
                    vec!["D_head", "D_head_extra", "D_tail", "Other_1"],
                    0..4,
                ),
                2,
            ),
            k in 1usize..4,
        ) {
            let (set, queries) = scenario();
            let run = RetrieverRun {
                run_id: "prop".into(),
                rankings: queries
                    .qa
                    .iter()
                    .zip(&rankings)
                    .map(|(q, docs)| {
                        (q.query_id.clone(), docs.iter().map(|d| d.to_string()).collect())
                    })
                    .collect(),
            };
            let report =
                evaluate(&[set], &queries, &run, &EvalOptions { k, strict: true }).unwrap();
            let qa = &report.tasks["qa"];
            for row in &qa.accuracy {
                prop_assert_eq!(row.all.total, row.head.total + row.tail.total);
                prop_assert_eq!(row.all.hits, row.head.hits + row.tail.hits);
                prop_assert!((0.0..=1.0).contains(&row.all.value));
                prop_assert!(row.all_correct.total <= 1);
            }
            let first = &qa.accuracy[0];
            let last = qa.accuracy.last().unwrap();
            prop_assert!(last.all.hits >= first.all.hits, "hits grow with k");
            let c = &qa.confusion;
            prop_assert_eq!(c.all.total, c.head.total + c.tail.total);
            prop_assert_eq!(c.all.hits, c.head.hits + c.tail.hits);
        }
    }
}
