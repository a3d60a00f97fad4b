//! Query generation: every surviving fact becomes one question-answering
//! query, one slot-filling query, and one supports/refutes claim pair.
//!
//! Queries always mention the set's shared name, never an entity's
//! canonical label, so retrieval has to resolve the ambiguity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::hash::stable_hash;
use crate::kg::{EntityRecord, FactTuple};
use crate::sets::AmberSet;

/// Claim label for a fact-checking query built from a true fact.
pub const SUPPORTS: &str = "SUPPORTS";
/// Claim label for a fact-checking query built from a corrupted fact.
pub const REFUTES: &str = "REFUTES";

/// Separator between the name and the property label in slot-filling input.
pub const SF_SEPARATOR: &str = "[SEP]";

/// The three downstream task formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Question answering.
    Qa,
    /// Slot filling.
    Sf,
    /// Fact checking.
    Fc,
}

impl Task {
    /// All tasks, in the order reports list them.
    pub const ALL: [Task; 3] = [Task::Qa, Task::Sf, Task::Fc];

    /// Lowercase task tag used in query ids and file names.
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Qa => "qa",
            Task::Sf => "sf",
            Task::Fc => "fc",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qa" => Ok(Task::Qa),
            "sf" => Ok(Task::Sf),
            "fc" => Ok(Task::Fc),
            other => Err(Error::Config(format!(
                "unknown task {other:?}, expected qa, sf, or fc"
            ))),
        }
    }
}

/// Per-property surface templates for question answering and claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateEntry {
    /// Question templates; each contains a `$name` slot.
    pub qa: Vec<String>,
    /// Claim templates; each contains `$name` and `$object` slots.
    pub fc: Vec<String>,
}

/// The template bank, keyed by property id.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TemplateBank {
    entries: BTreeMap<String, TemplateEntry>,
}

#[derive(Deserialize)]
struct TemplateEntryWire {
    #[serde(default)]
    qa: Vec<String>,
    #[serde(default)]
    fc: Vec<String>,
}

fn check_slots(pid: &str, kind: &str, template: &str, want_object: bool) -> Result<()> {
    if !template.contains("$name") {
        return Err(Error::Config(format!(
            "{pid}: {kind} template {template:?} lacks the $name slot"
        )));
    }
    match (want_object, template.contains("$object")) {
        (true, false) => Err(Error::Config(format!(
            "{pid}: fc template {template:?} lacks the $object slot"
        ))),
        (false, true) => Err(Error::Config(format!(
            "{pid}: qa template {template:?} must not use $object"
        ))),
        _ => Ok(()),
    }
}

impl TemplateBank {
    /// Parse a bank from TOML text, one table per property:
    ///
    /// ```toml
    /// [P1303]
    /// qa = ["What instrument does $name play?"]
    /// fc = ["$name plays the $object."]
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let wire: BTreeMap<String, TemplateEntryWire> = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad template file: {e}")))?;
        let mut entries = BTreeMap::new();
        for (pid, entry) in wire {
            if entry.qa.is_empty() {
                return Err(Error::Config(format!("{pid}: no qa templates")));
            }
            if entry.fc.is_empty() {
                return Err(Error::Config(format!("{pid}: no fc templates")));
            }
            for t in &entry.qa {
                check_slots(&pid, "qa", t, false)?;
            }
            for t in &entry.fc {
                check_slots(&pid, "fc", t, true)?;
            }
            entries.insert(
                pid,
                TemplateEntry {
                    qa: entry.qa,
                    fc: entry.fc,
                },
            );
        }
        Ok(TemplateBank { entries })
    }

    /// Load a bank from a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Properties covered by the bank.
    pub fn pids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Templates for one property.
    pub fn entry(&self, pid: &str) -> Option<&TemplateEntry> {
        self.entries.get(pid)
    }

    /// Error unless every listed property has templates.
    pub fn validate_against(&self, pids: &BTreeSet<String>) -> Result<()> {
        let missing: Vec<&str> = pids
            .iter()
            .filter(|pid| !self.entries.contains_key(*pid))
            .map(String::as_str)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "template bank lacks entries for: {}",
                missing.join(", ")
            )))
        }
    }

    fn pick<'a>(&'a self, list_of: fn(&TemplateEntry) -> &Vec<String>, set_id: &str, pid: &str) -> Result<&'a str> {
        let entry = self
            .entries
            .get(pid)
            .ok_or_else(|| Error::Config(format!("no templates for property {pid}")))?;
        let list = list_of(entry);
        let index = (stable_hash(&[set_id, pid]) % list.len() as u64) as usize;
        Ok(&list[index])
    }

    /// Deterministically chosen question template for a set and property.
    pub fn qa_template(&self, set_id: &str, pid: &str) -> Result<&str> {
        self.pick(|e| &e.qa, set_id, pid)
    }

    /// Deterministically chosen claim template for a set and property.
    pub fn fc_template(&self, set_id: &str, pid: &str) -> Result<&str> {
        self.pick(|e| &e.fc, set_id, pid)
    }
}

/// Substitute `$name` and, when given, `$object` into a template. Other
/// text, including bare `$`, passes through untouched.
pub fn fill_template(template: &str, name: &str, object: Option<&str>) -> String {
    let mut out = String::with_capacity(template.len() + name.len());
    let mut rest = template;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos..];
        if let Some(tail) = after.strip_prefix("$name") {
            out.push_str(name);
            rest = tail;
        } else if let (Some(tail), Some(obj)) = (after.strip_prefix("$object"), object) {
            out.push_str(obj);
            rest = tail;
        } else {
            out.push('$');
            rest = &after[1..];
        }
    }
    out.push_str(rest);
    out
}

/// Value frequencies per property across an entire knowledge graph, used
/// to pick plausible false objects for refuted claims.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct GlobalValueStats {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl GlobalValueStats {
    /// Tally values of the listed properties over a stream of entities.
    pub fn collect<'a>(
        entities: impl IntoIterator<Item = &'a EntityRecord>,
        pids: &BTreeSet<String>,
    ) -> Self {
        let mut stats = GlobalValueStats::default();
        for entity in entities {
            for tuple in &entity.tuples {
                if pids.contains(&tuple.pid) {
                    stats.observe(&tuple.pid, &tuple.value_text);
                }
            }
        }
        stats
    }

    /// Record one observed value.
    pub fn observe(&mut self, pid: &str, value: &str) {
        *self
            .counts
            .entry(pid.to_string())
            .or_default()
            .entry(value.to_string())
            .or_insert(0) += 1;
    }

    /// The most frequent value of `pid` that differs, case-insensitively,
    /// from `not`. Frequency ties break toward the smaller value.
    pub fn most_common_alternative(&self, pid: &str, not: &str) -> Option<&str> {
        let not_folded = not.to_lowercase();
        let mut best: Option<(&str, usize)> = None;
        for (value, n) in self.counts.get(pid)? {
            if value.to_lowercase() == not_folded {
                continue;
            }
            if best.is_none_or(|(_, bn)| *n > bn) {
                best = Some((value, *n));
            }
        }
        best.map(|(v, _)| v)
    }

    /// Distinct values observed for a property.
    pub fn value_count(&self, pid: &str) -> usize {
        self.counts.get(pid).map_or(0, BTreeMap::len)
    }
}

/// One retrieval query for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskQuery {
    /// `set:entity:property:task` identifier, with `:s` or `:r` appended
    /// for claim pairs.
    pub query_id: String,
    /// Owning set.
    pub set_id: String,
    /// Entity the query is about.
    pub qid: String,
    /// Property the query probes.
    pub pid: String,
    /// Task format.
    pub task: Task,
    /// Retrieval input text.
    pub input: String,
    /// Expected output: the fact's value, or a claim label.
    pub answer: String,
    /// Documents that verify the underlying fact.
    pub gold_doc_ids: BTreeSet<String>,
    /// True when the entity is the set's head.
    pub is_head: bool,
}

fn query_id(set_id: &str, qid: &str, pid: &str, task: Task, suffix: Option<&str>) -> String {
    match suffix {
        Some(s) => format!("{set_id}:{qid}:{pid}:{task}:{s}"),
        None => format!("{set_id}:{qid}:{pid}:{task}"),
    }
}

fn gold_for(set: &AmberSet, qid: &str, pid: &str) -> Result<BTreeSet<String>> {
    set.gold_docs
        .get(qid)
        .and_then(|g| g.get(pid))
        .cloned()
        .ok_or_else(|| {
            Error::Validation(format!(
                "set {}: tuple {pid} of {qid} has no gold documents",
                set.set_id
            ))
        })
}

/// Build the question-answering query for one fact.
pub fn qa_query(set: &AmberSet, tuple: &FactTuple, bank: &TemplateBank) -> Result<TaskQuery> {
    let template = bank.qa_template(&set.set_id, &tuple.pid)?;
    Ok(TaskQuery {
        query_id: query_id(&set.set_id, &tuple.subject_qid, &tuple.pid, Task::Qa, None),
        set_id: set.set_id.clone(),
        qid: tuple.subject_qid.clone(),
        pid: tuple.pid.clone(),
        task: Task::Qa,
        input: fill_template(template, &set.name, None),
        answer: tuple.value_text.clone(),
        gold_doc_ids: gold_for(set, &tuple.subject_qid, &tuple.pid)?,
        is_head: set.is_head(&tuple.subject_qid),
    })
}

/// Build the slot-filling query for one fact.
pub fn sf_query(set: &AmberSet, tuple: &FactTuple) -> Result<TaskQuery> {
    if tuple.property_label.is_empty() {
        return Err(Error::Validation(format!(
            "set {}: tuple {} of {} has an empty property label",
            set.set_id, tuple.pid, tuple.subject_qid
        )));
    }
    Ok(TaskQuery {
        query_id: query_id(&set.set_id, &tuple.subject_qid, &tuple.pid, Task::Sf, None),
        set_id: set.set_id.clone(),
        qid: tuple.subject_qid.clone(),
        pid: tuple.pid.clone(),
        task: Task::Sf,
        input: format!("{} {SF_SEPARATOR} {}", set.name, tuple.property_label),
        answer: tuple.value_text.clone(),
        gold_doc_ids: gold_for(set, &tuple.subject_qid, &tuple.pid)?,
        is_head: set.is_head(&tuple.subject_qid),
    })
}

/// Build the supported and refuted claims for one fact.
///
/// The refuted claim swaps in the property's most frequent other value.
/// When no other value exists anywhere in the graph, no believable false
/// claim can be made and the pair is skipped with a warning.
pub fn fc_pair(
    set: &AmberSet,
    tuple: &FactTuple,
    bank: &TemplateBank,
    stats: &GlobalValueStats,
) -> Result<Option<(TaskQuery, TaskQuery)>> {
    let template = bank.fc_template(&set.set_id, &tuple.pid)?;
    let Some(alternative) = stats.most_common_alternative(&tuple.pid, &tuple.value_text) else {
        log::warn!(
            "set {}: no alternative value for {} of {}, claim pair skipped",
            set.set_id,
            tuple.pid,
            tuple.subject_qid
        );
        return Ok(None);
    };
    let gold = gold_for(set, &tuple.subject_qid, &tuple.pid)?;
    let base = TaskQuery {
        query_id: String::new(),
        set_id: set.set_id.clone(),
        qid: tuple.subject_qid.clone(),
        pid: tuple.pid.clone(),
        task: Task::Fc,
        input: String::new(),
        answer: String::new(),
        gold_doc_ids: gold,
        is_head: set.is_head(&tuple.subject_qid),
    };
    let supports = TaskQuery {
        query_id: query_id(&set.set_id, &tuple.subject_qid, &tuple.pid, Task::Fc, Some("s")),
        input: fill_template(template, &set.name, Some(&tuple.value_text)),
        answer: SUPPORTS.to_string(),
        ..base.clone()
    };
    let refutes = TaskQuery {
        query_id: query_id(&set.set_id, &tuple.subject_qid, &tuple.pid, Task::Fc, Some("r")),
        input: fill_template(template, &set.name, Some(alternative)),
        answer: REFUTES.to_string(),
        ..base
    };
    Ok(Some((supports, refutes)))
}

/// Queries for a batch of sets, split by task.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct GeneratedQueries {
    /// Question-answering queries.
    pub qa: Vec<TaskQuery>,
    /// Slot-filling queries.
    pub sf: Vec<TaskQuery>,
    /// Fact-checking queries.
    pub fc: Vec<TaskQuery>,
}

impl GeneratedQueries {
    /// All queries, qa then sf then fc.
    pub fn all(&self) -> impl Iterator<Item = &TaskQuery> {
        self.qa.iter().chain(&self.sf).chain(&self.fc)
    }

    /// Total query count.
    pub fn len(&self) -> usize {
        self.qa.len() + self.sf.len() + self.fc.len()
    }

    /// True when no queries were generated.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generation counters reported alongside the query files.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenCounters {
    /// Sets processed.
    pub sets: usize,
    /// Facts turned into queries.
    pub tuples: usize,
    /// Question-answering queries written.
    pub qa_queries: usize,
    /// Slot-filling queries written.
    pub sf_queries: usize,
    /// Fact-checking queries written.
    pub fc_queries: usize,
    /// Claim pairs dropped for want of an alternative value.
    pub fc_pairs_skipped: usize,
    /// True when any claim pair was skipped, so the two-claims-per-fact
    /// rule only holds approximately.
    pub fc_invariant_relaxed: bool,
}

/// Generate all queries for a batch of sets. Output vectors are sorted by
/// query id.
pub fn generate_queries(
    sets: &[AmberSet],
    bank: &TemplateBank,
    stats: &GlobalValueStats,
) -> Result<(GeneratedQueries, GenCounters)> {
    let mut out = GeneratedQueries::default();
    let mut counters = GenCounters::default();
    for set in sets {
        counters.sets += 1;
        for (_, tuples) in set.query_bearing_members() {
            for tuple in tuples {
                counters.tuples += 1;
                out.qa.push(qa_query(set, tuple, bank)?);
                out.sf.push(sf_query(set, tuple)?);
                match fc_pair(set, tuple, bank, stats)? {
                    Some((supports, refutes)) => {
                        out.fc.push(supports);
                        out.fc.push(refutes);
                    }
                    None => counters.fc_pairs_skipped += 1,
                }
            }
        }
    }
    for list in [&mut out.qa, &mut out.sf, &mut out.fc] {
        list.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    }
    counters.qa_queries = out.qa.len();
    counters.sf_queries = out.sf.len();
    counters.fc_queries = out.fc.len();
    counters.fc_invariant_relaxed = counters.fc_pairs_skipped > 0;
    Ok((out, counters))
}

/// Write queries as one JSON object per line.
pub fn write_queries(path: &Path, queries: &[TaskQuery]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for query in queries {
        serde_json::to_writer(&mut w, query).map_err(|e| {
            Error::Validation(format!("cannot serialize query {}: {e}", query.query_id))
        })?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read queries back from a JSONL file.
pub fn read_queries(path: &Path) -> Result<Vec<TaskQuery>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut queries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let query: TaskQuery = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("bad query record: {e}")).with_path(path))?;
        queries.push(query);
    }
    Ok(queries)
}
