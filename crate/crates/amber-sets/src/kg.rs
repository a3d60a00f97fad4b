//! Knowledge-graph ingestion: streaming entity parsing and the alias index.
//!
//! The input is line-delimited JSON, one entity per line (see
//! `docs/formats.md` in the repository root):
//!
//! ```json
//! {"qid": "Q517", "name": "Napoleon", "aliases": ["Napoleon Bonaparte"],
//!  "types": ["human"],
//!  "tuples": [{"pid": "P607", "property_label": "battles or wars",
//!              "value_text": "Napoleon Wars"}]}
//! ```
//!
//! The canonical label always counts as an alias, so the alias index can
//! treat "name an entity is known by" uniformly. Alias matching downstream is
//! exact and case-sensitive.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// One (entity, property, value) assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactTuple {
    /// Entity the fact is about.
    pub subject_qid: String,
    /// Property identifier, e.g. "P641".
    pub pid: String,
    /// Human-readable property name, e.g. "sport".
    pub property_label: String,
    /// Value rendered as text; doubles as the query answer.
    pub value_text: String,
    /// Entity identifier of the value, when the value is itself an entity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_qid: Option<String>,
}

/// One knowledge-graph entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    /// Unique entity identifier within a dump.
    pub qid: String,
    /// Canonical label.
    pub canonical_name: String,
    /// Every surface name, canonical label included.
    pub aliases: BTreeSet<String>,
    /// Entity-type tags, e.g. "human", "film".
    pub type_tags: BTreeSet<String>,
    /// Fact tuples, at most one per property.
    pub tuples: Vec<FactTuple>,
}

impl EntityRecord {
    /// Look up this entity's tuple for a property, if any.
    pub fn tuple(&self, pid: &str) -> Option<&FactTuple> {
        self.tuples.iter().find(|t| t.pid == pid)
    }
}

#[derive(Serialize, Deserialize)]
struct TupleWire {
    pid: String,
    property_label: String,
    value_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value_qid: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct EntityWire {
    qid: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    types: Vec<String>,
    #[serde(default)]
    tuples: Vec<TupleWire>,
}

/// Counters accumulated while streaming a dump.
#[derive(Debug, Default, Clone, Serialize)]
pub struct IngestStats {
    /// Entities successfully parsed.
    pub entities: usize,
    /// Tuples dropped because an earlier tuple already claimed the property.
    pub duplicate_tuples: usize,
}

fn convert(wire: EntityWire, line: usize) -> Result<(EntityRecord, usize)> {
    if wire.qid.is_empty() {
        return Err(Error::parse(line, "entity record has empty \"qid\""));
    }
    if wire.name.is_empty() {
        return Err(Error::parse(line, "entity record has empty \"name\""));
    }
    let mut aliases: BTreeSet<String> = wire.aliases.into_iter().collect();
    aliases.insert(wire.name.clone());

    let mut tuples = Vec::with_capacity(wire.tuples.len());
    let mut seen_pids = BTreeSet::new();
    let mut duplicates = 0usize;
    for t in wire.tuples {
        if t.pid.is_empty() || t.value_text.is_empty() {
            return Err(Error::parse(
                line,
                format!("tuple on entity {} has empty pid or value_text", wire.qid),
            ));
        }
        if !seen_pids.insert(t.pid.clone()) {
            // First occurrence wins.
            log::warn!("entity {}: duplicate tuple for {} dropped", wire.qid, t.pid);
            duplicates += 1;
            continue;
        }
        tuples.push(FactTuple {
            subject_qid: wire.qid.clone(),
            pid: t.pid,
            property_label: t.property_label,
            value_text: t.value_text,
            value_qid: t.value_qid,
        });
    }

    Ok((
        EntityRecord {
            qid: wire.qid,
            canonical_name: wire.name,
            aliases,
            type_tags: wire.types.into_iter().collect(),
            tuples,
        },
        duplicates,
    ))
}

/// Parse one line of the KG input format.
///
/// `line_no` is 1-based and is echoed back in parse errors. Duplicate
/// property tuples keep the first occurrence; the rest are logged.
pub fn parse_entity_record(line: &str, line_no: usize) -> Result<EntityRecord> {
    let wire: EntityWire = serde_json::from_str(line)
        .map_err(|e| Error::parse(line_no, format!("bad entity record: {e}")))?;
    convert(wire, line_no).map(|(rec, _)| rec)
}

/// Serialize an entity back to its one-line wire form.
///
/// `parse_entity_record` on the output reproduces the record exactly.
pub fn serialize_entity_record(record: &EntityRecord) -> String {
    let wire = EntityWire {
        qid: record.qid.clone(),
        name: record.canonical_name.clone(),
        aliases: record.aliases.iter().cloned().collect(),
        types: record.type_tags.iter().cloned().collect(),
        tuples: record
            .tuples
            .iter()
            .map(|t| TupleWire {
                pid: t.pid.clone(),
                property_label: t.property_label.clone(),
                value_text: t.value_text.clone(),
                value_qid: t.value_qid.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&wire).expect("entity serialization cannot fail")
}

/// Streaming reader over a KG dump file. Blank lines are skipped.
pub struct KgReader {
    lines: Lines<BufReader<File>>,
    path: std::path::PathBuf,
    line_no: usize,
    /// Counters updated as records are consumed.
    pub stats: IngestStats,
}

impl KgReader {
    /// Open a dump file for streaming.
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        Ok(KgReader {
            lines: BufReader::new(file).lines(),
            path: path.to_path_buf(),
            line_no: 0,
            stats: IngestStats::default(),
        })
    }
}

impl Iterator for KgReader {
    type Item = Result<EntityRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(io_err(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<EntityWire>(&line)
                .map_err(|e| Error::parse(self.line_no, format!("bad entity record: {e}")))
                .and_then(|w| convert(w, self.line_no))
                .map_err(|e| e.with_path(&self.path));
            return Some(match parsed {
                Ok((rec, dups)) => {
                    self.stats.entities += 1;
                    self.stats.duplicate_tuples += dups;
                    Ok(rec)
                }
                Err(e) => Err(e),
            });
        }
    }
}

/// Load an entire dump into memory, keyed by qid.
///
/// A qid appearing twice violates the dump contract and is an error.
pub fn load_entities(path: &Path) -> Result<(BTreeMap<String, EntityRecord>, IngestStats)> {
    let mut reader = KgReader::open(path)?;
    let mut entities = BTreeMap::new();
    for record in &mut reader {
        let record = record?;
        let qid = record.qid.clone();
        if entities.insert(qid.clone(), record).is_some() {
            return Err(Error::Validation(format!(
                "duplicate entity {qid} in {}",
                path.display()
            )));
        }
    }
    Ok((entities, reader.stats))
}

/// Exact, case-sensitive mapping from alias text to the entities bearing it.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct AliasIndex {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl AliasIndex {
    /// Build an index from a pass over entity records.
    pub fn from_entities<'a>(entities: impl IntoIterator<Item = &'a EntityRecord>) -> Self {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for entity in entities {
            for alias in &entity.aliases {
                map.entry(alias.clone()).or_default().insert(entity.qid.clone());
            }
        }
        AliasIndex { map }
    }

    /// Merge a shard-local index into this one.
    pub fn merge(mut self, other: AliasIndex) -> AliasIndex {
        for (alias, qids) in other.map {
            self.map.entry(alias).or_default().extend(qids);
        }
        self
    }

    /// Entities bearing an alias, if any.
    pub fn bearers(&self, alias: &str) -> Option<&BTreeSet<String>> {
        self.map.get(alias)
    }

    /// All (alias, bearers) pairs in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.map.iter()
    }

    /// Aliases shared by at least two entities.
    pub fn polysemous(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.map.iter().filter(|(_, qids)| qids.len() >= 2)
    }

    /// Number of distinct aliases.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// True when the index holds no aliases.
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Build the alias index over a stream of validated entities.
pub fn build_alias_index<'a>(entities: impl IntoIterator<Item = &'a EntityRecord>) -> AliasIndex {
    AliasIndex::from_entities(entities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entity(qid: &str, name: &str, aliases: &[&str]) -> EntityRecord {
        parse_entity_record(
            &serde_json::json!({
                "qid": qid,
                "name": name,
                "aliases": aliases,
                "types": ["human"],
                "tuples": [],
            })
            .to_string(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn parses_full_record() {
        let line = r#"{"qid":"Q517","name":"Napoleon","aliases":["Napoleon Bonaparte"],
            "types":["human"],
            "tuples":[{"pid":"P607","property_label":"battles or wars","value_text":"Napoleon Wars"}]}"#;
        let rec = parse_entity_record(line, 1).unwrap();
        assert_eq!(rec.qid, "Q517");
        assert_eq!(rec.tuples.len(), 1);
        assert_eq!(rec.tuples[0].subject_qid, "Q517");
        assert_eq!(rec.tuples[0].value_text, "Napoleon Wars");
        assert!(rec.aliases.contains("Napoleon"), "label counts as alias");
    }

    #[test]
    fn empty_alias_list_still_has_label() {
        let rec = parse_entity_record(r#"{"qid":"Q1","name":"Solo","types":[]}"#, 1).unwrap();
        assert_eq!(rec.aliases.iter().collect::<Vec<_>>(), vec!["Solo"]);
    }

    #[test]
    fn missing_qid_is_a_parse_error_with_line_number() {
        let err = parse_entity_record(r#"{"name":"Ghost"}"#, 17).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 17),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_qid_rejected() {
        assert!(parse_entity_record(r#"{"qid":"","name":"X"}"#, 1).is_err());
    }

    #[test]
    fn duplicate_property_keeps_first() {
        let line = r#"{"qid":"Q1","name":"X","tuples":[
            {"pid":"P641","property_label":"sport","value_text":"Rugby"},
            {"pid":"P641","property_label":"sport","value_text":"Judo"}]}"#;
        let rec = parse_entity_record(line, 1).unwrap();
        assert_eq!(rec.tuples.len(), 1);
        assert_eq!(rec.tuples[0].value_text, "Rugby");
    }

    #[test]
    fn alias_index_groups_shared_names() {
        let e1 = entity("Q1", "Abraham Lincoln", &["Abe Lincoln"]);
        let e2 = entity("Q2", "Abe Lincoln", &[]);
        let index = build_alias_index([&e1, &e2]);
        let bearers = index.bearers("Abe Lincoln").unwrap();
        assert_eq!(bearers.iter().collect::<Vec<_>>(), vec!["Q1", "Q2"]);
    }

    #[test]
    fn single_bearer_alias_is_retained() {
        let e1 = entity("Q1", "Abraham Lincoln", &[]);
        let index = build_alias_index([&e1]);
        assert!(index.bearers("Abraham Lincoln").is_some());
        assert_eq!(index.polysemous().count(), 0);
    }

    #[test]
    fn alias_matching_is_case_sensitive() {
        let e1 = entity("Q1", "apple", &[]);
        let e2 = entity("Q2", "Apple", &[]);
        let index = build_alias_index([&e1, &e2]);
        assert_eq!(index.len(), 2);
        assert_eq!(index.bearers("apple").unwrap().len(), 1);
        assert_eq!(index.bearers("Apple").unwrap().len(), 1);
    }

    #[test]
    fn merge_combines_shards() {
        let e1 = entity("Q1", "Abe Lincoln", &[]);
        let e2 = entity("Q2", "Abe Lincoln", &[]);
        let merged = build_alias_index([&e1]).merge(build_alias_index([&e2]));
        assert_eq!(merged, build_alias_index([&e1, &e2]));
    }

    fn arb_entity() -> impl Strategy<Value = EntityRecord> {
        (
            "[A-Z][0-9]{1,4}",
            "[a-zA-Z ]{1,12}",
            proptest::collection::vec("[a-zA-Z ]{1,12}", 0..4),
            proptest::collection::vec("[a-z]{2,8}", 0..3),
            proptest::collection::btree_map("P[0-9]{1,3}", "[a-zA-Z0-9 ]{1,10}", 0..4),
        )
            .prop_map(|(qid, name, aliases, types, tuples)| {
                let mut alias_set: BTreeSet<String> = aliases.into_iter().collect();
                alias_set.insert(name.clone());
                EntityRecord {
                    tuples: tuples
                        .into_iter()
                        .map(|(pid, value)| FactTuple {
                            subject_qid: qid.clone(),
                            pid,
                            property_label: "p".into(),
                            value_text: value,
                            value_qid: None,
                        })
                        .collect(),
                    qid,
                    canonical_name: name,
                    aliases: alias_set,
                    type_tags: types.into_iter().collect(),
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip(entity in arb_entity()) {
            let line = serialize_entity_record(&entity);
            let reparsed = parse_entity_record(&line, 1).unwrap();
            prop_assert_eq!(reparsed, entity);
        }

        #[test]
        fn index_is_order_independent(entities in proptest::collection::vec(arb_entity(), 0..8)) {
            // Dedup qids so both orders see the same multiset of entities.
            let mut by_qid = BTreeMap::new();
            for e in entities {
                by_qid.insert(e.qid.clone(), e);
            }
            let forward: Vec<_> = by_qid.values().collect();
            let mut reversed = forward.clone();
            reversed.reverse();
            prop_assert_eq!(
                AliasIndex::from_entities(forward.iter().copied()),
                AliasIndex::from_entities(reversed.iter().copied())
            );
        }

        #[test]
        fn bearer_counts_cover_entities(entities in proptest::collection::vec(arb_entity(), 0..8)) {
            let mut by_qid = BTreeMap::new();
            for e in entities {
                by_qid.insert(e.qid.clone(), e);
            }
            let index = AliasIndex::from_entities(by_qid.values());
            let total_bearers: usize = index.iter().map(|(_, qids)| qids.len()).sum();
            prop_assert!(total_bearers >= by_qid.len());
        }
    }
}
