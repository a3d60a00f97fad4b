//! Ambiguity-set construction: collection specs, candidate grouping, and the
//! filter cascade that turns name collisions into benchmark sets.
//!
//! One set is built per (collection, shared name). The cascade:
//!
//! 1. type whitelist: only entities typed for the collection participate
//! 2. property whitelist: only listed properties survive, per type
//! 3. popularity gap: the most viewed member must lead the runner-up by at
//!    least [`MIN_POPULARITY_GAP`]
//! 4. shared-property removal: a property held by two members distinguishes
//!    nobody, so it is dropped from every member
//! 5. gold alignment: a fact must appear early in some document about its
//!    entity, or it cannot be verified against the corpus and is dropped
//! 6. finalize: the head and at least one tail must keep at least one fact
//!
//! Members that lose all their facts stay in the set as distractors; their
//! documents still matter for the confusion metric.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{value_in_prefix, DocumentIndex, PREFIX_TOKEN_LIMIT};
use crate::error::{io_err, Error, Result};
use crate::hash::{hex16, stable_hash};
use crate::kg::{AliasIndex, EntityRecord, FactTuple};
use crate::popularity::{assign_head_tail, popularity_gap, PopularityTable, MIN_POPULARITY_GAP};

/// One named collection: which entity types participate and which
/// properties are eligible per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionSpec {
    /// Collection name, part of every set id.
    pub name: String,
    /// Entity-type tags admitted into this collection.
    pub allowed_types: BTreeSet<String>,
    /// Eligible property ids, keyed by type tag.
    pub property_whitelist: BTreeMap<String, BTreeSet<String>>,
}

impl CollectionSpec {
    /// True when the entity carries at least one admitted type tag.
    pub fn matches(&self, entity: &EntityRecord) -> bool {
        entity.type_tags.iter().any(|t| self.allowed_types.contains(t))
    }

    /// Property ids eligible for this entity: the union over its admitted
    /// type tags.
    pub fn whitelisted_pids(&self, entity: &EntityRecord) -> BTreeSet<String> {
        let mut pids = BTreeSet::new();
        for tag in &entity.type_tags {
            if let Some(list) = self.property_whitelist.get(tag) {
                pids.extend(list.iter().cloned());
            }
        }
        pids
    }

    /// Every property id mentioned anywhere in the whitelist.
    pub fn all_pids(&self) -> BTreeSet<String> {
        self.property_whitelist
            .values()
            .flat_map(|pids| pids.iter().cloned())
            .collect()
    }
}

#[derive(Deserialize)]
struct CollectionWire {
    name: String,
    types: Vec<String>,
    #[serde(default)]
    properties: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct CollectionsFileWire {
    #[serde(default)]
    collection: Vec<CollectionWire>,
}

/// Parse collection specs from TOML text.
///
/// ```toml
/// [[collection]]
/// name = "human"
/// types = ["human"]
/// [collection.properties]
/// human = ["P607", "P641"]
/// ```
pub fn parse_collections(text: &str) -> Result<Vec<CollectionSpec>> {
    let wire: CollectionsFileWire = toml::from_str(text)
        .map_err(|e| Error::Config(format!("bad collections file: {e}")))?;
    if wire.collection.is_empty() {
        return Err(Error::Config("collections file defines no collections".into()));
    }
    let mut specs = Vec::new();
    let mut names = BTreeSet::new();
    for c in wire.collection {
        if c.name.is_empty() {
            return Err(Error::Config("collection with empty name".into()));
        }
        if !names.insert(c.name.clone()) {
            return Err(Error::Config(format!("duplicate collection {:?}", c.name)));
        }
        if c.types.is_empty() {
            return Err(Error::Config(format!(
                "collection {:?} admits no entity types",
                c.name
            )));
        }
        let allowed_types: BTreeSet<String> = c.types.into_iter().collect();
        let mut property_whitelist = BTreeMap::new();
        for (tag, pids) in c.properties {
            if !allowed_types.contains(&tag) {
                return Err(Error::Config(format!(
                    "collection {:?} lists properties for unadmitted type {tag:?}",
                    c.name
                )));
            }
            let mut set = BTreeSet::new();
            for pid in pids {
                if pid.is_empty() {
                    return Err(Error::Config(format!(
                        "collection {:?}, type {tag:?}: empty property id",
                        c.name
                    )));
                }
                if !set.insert(pid.clone()) {
                    return Err(Error::Config(format!(
                        "collection {:?}, type {tag:?}: duplicate property {pid}",
                        c.name
                    )));
                }
            }
            property_whitelist.insert(tag, set);
        }
        specs.push(CollectionSpec {
            name: c.name,
            allowed_types,
            property_whitelist,
        });
    }
    Ok(specs)
}

/// Load collection specs from a TOML file.
pub fn load_collections(path: &Path) -> Result<Vec<CollectionSpec>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_collections(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Deterministic set identifier for a (collection, shared name) pair.
pub fn set_id(collection: &str, name: &str) -> String {
    hex16(stable_hash(&[collection, name]))
}

/// A name shared by several entities admitted to a collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupCandidate {
    /// The shared surface name.
    pub alias: String,
    /// Bearers admitted by the type whitelist, in qid order.
    pub qids: Vec<String>,
}

/// Collect candidate groups: polysemous aliases whose type-admitted
/// bearers still number at least two.
pub fn candidate_groups(
    aliases: &AliasIndex,
    entities: &BTreeMap<String, EntityRecord>,
    spec: &CollectionSpec,
) -> Vec<GroupCandidate> {
    let mut groups = Vec::new();
    for (alias, bearers) in aliases.polysemous() {
        let qids: Vec<String> = bearers
            .iter()
            .filter(|qid| entities.get(*qid).is_some_and(|e| spec.matches(e)))
            .cloned()
            .collect();
        if qids.len() >= 2 {
            groups.push(GroupCandidate {
                alias: alias.clone(),
                qids,
            });
        }
    }
    groups
}

/// Keep only tuples whose property is whitelisted for the entity.
pub fn whitelisted_tuples(entity: &EntityRecord, spec: &CollectionSpec) -> Vec<FactTuple> {
    let pids = spec.whitelisted_pids(entity);
    entity
        .tuples
        .iter()
        .filter(|t| pids.contains(&t.pid))
        .cloned()
        .collect()
}

/// Drop every property that two or more members both hold. Returns the
/// number of tuples removed.
pub fn remove_shared_properties(members: &mut BTreeMap<String, Vec<FactTuple>>) -> usize {
    let mut holders: BTreeMap<&str, usize> = BTreeMap::new();
    for tuples in members.values() {
        for t in tuples {
            *holders.entry(t.pid.as_str()).or_insert(0) += 1;
        }
    }
    let shared: BTreeSet<String> = holders
        .iter()
        .filter(|(_, n)| **n >= 2)
        .map(|(pid, _)| pid.to_string())
        .collect();
    let mut removed = 0;
    for tuples in members.values_mut() {
        let before = tuples.len();
        tuples.retain(|t| !shared.contains(&t.pid));
        removed += before - tuples.len();
    }
    removed
}

/// Outcome of aligning one member's tuples against the corpus.
pub struct Alignment {
    /// Documents linked to the entity.
    pub entity_docs: BTreeSet<String>,
    /// Verifying documents per surviving property.
    pub gold_docs: BTreeMap<String, BTreeSet<String>>,
}

/// Find verifying documents for each tuple: documents about the entity
/// whose leading [`PREFIX_TOKEN_LIMIT`] tokens contain the fact's value.
/// Tuples without a verifying document are removed.
pub fn align_member(
    qid: &str,
    tuples: &mut Vec<FactTuple>,
    corpus: &DocumentIndex,
) -> Alignment {
    let entity_docs = corpus.docs_for_entity(qid);
    let mut gold_docs = BTreeMap::new();
    tuples.retain(|t| {
        let golds: BTreeSet<String> = entity_docs
            .iter()
            .filter(|doc_id| {
                corpus
                    .get(doc_id)
                    .is_some_and(|d| value_in_prefix(&d.text, &t.value_text, PREFIX_TOKEN_LIMIT))
            })
            .cloned()
            .collect();
        if golds.is_empty() {
            false
        } else {
            gold_docs.insert(t.pid.clone(), golds);
            true
        }
    });
    Alignment {
        entity_docs,
        gold_docs,
    }
}

/// One finished ambiguity set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmberSet {
    /// Stable identifier derived from collection and name.
    pub set_id: String,
    /// Collection this set belongs to.
    pub collection: String,
    /// The surface name every member shares.
    pub name: String,
    /// Most viewed member.
    pub head_qid: String,
    /// Remaining members, views descending then qid ascending.
    pub tail_qids: Vec<String>,
    /// Page views per member.
    pub views: BTreeMap<String, u64>,
    /// Surviving fact tuples per member. Empty for distractors.
    pub members: BTreeMap<String, Vec<FactTuple>>,
    /// Verifying documents per member and property.
    pub gold_docs: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    /// All documents linked to each member.
    pub entity_docs: BTreeMap<String, BTreeSet<String>>,
}

impl AmberSet {
    /// Members that still carry facts, in qid order.
    pub fn query_bearing_members(&self) -> impl Iterator<Item = (&String, &Vec<FactTuple>)> {
        self.members.iter().filter(|(_, tuples)| !tuples.is_empty())
    }

    /// Members retained only as distractors.
    pub fn distractor_members(&self) -> impl Iterator<Item = &String> {
        self.members
            .iter()
            .filter(|(_, tuples)| tuples.is_empty())
            .map(|(qid, _)| qid)
    }

    /// True for the set's most viewed member.
    pub fn is_head(&self, qid: &str) -> bool {
        self.head_qid == qid
    }

    /// Relative popularity gap from the head down to `tail_qid`, or `None`
    /// when the stored views are inconsistent with the head choice.
    pub fn gap_to(&self, tail_qid: &str) -> Option<f64> {
        let head = self.views.get(&self.head_qid)?;
        let tail = self.views.get(tail_qid)?;
        popularity_gap(*head, *tail).ok()
    }

    /// Check every structural invariant, returning one message per
    /// violation. An empty vector means the set is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let id = &self.set_id;
        if *id != set_id(&self.collection, &self.name) {
            violations.push(format!(
                "{id}: set_id does not match collection {:?} and name {:?}",
                self.collection, self.name
            ));
        }
        if self.members.len() < 2 {
            violations.push(format!("{id}: fewer than two members"));
        }
        if !self.members.contains_key(&self.head_qid) {
            violations.push(format!("{id}: head {} is not a member", self.head_qid));
        }
        let mut listed: BTreeSet<&String> = BTreeSet::new();
        listed.insert(&self.head_qid);
        for tail in &self.tail_qids {
            if !listed.insert(tail) {
                violations.push(format!("{id}: {tail} listed twice"));
            }
            if !self.members.contains_key(tail) {
                violations.push(format!("{id}: tail {tail} is not a member"));
            }
        }
        if listed != self.members.keys().collect() {
            violations.push(format!("{id}: head and tails do not cover the members"));
        }
        for member in self.members.keys() {
            if !self.views.contains_key(member) {
                violations.push(format!("{id}: member {member} has no view count"));
            }
        }

        let mut expected = self.tail_qids.clone();
        expected.sort_by(|a, b| {
            let va = self.views.get(b).copied().unwrap_or(0);
            let vb = self.views.get(a).copied().unwrap_or(0);
            va.cmp(&vb).then_with(|| a.cmp(b))
        });
        if expected != self.tail_qids {
            violations.push(format!("{id}: tails are not in popularity order"));
        }
        if let Some(top_tail) = self.tail_qids.first() {
            let head_views = self.views.get(&self.head_qid).copied().unwrap_or(0);
            let tail_views = self.views.get(top_tail).copied().unwrap_or(0);
            match popularity_gap(head_views, tail_views) {
                Ok(gap) if gap >= MIN_POPULARITY_GAP => {}
                Ok(gap) => violations.push(format!(
                    "{id}: popularity gap {gap:.4} below {MIN_POPULARITY_GAP}"
                )),
                Err(_) => violations.push(format!(
                    "{id}: head {} is less viewed than tail {top_tail}",
                    self.head_qid
                )),
            }
        }

        let mut holders: BTreeMap<&str, usize> = BTreeMap::new();
        for (qid, tuples) in &self.members {
            for t in tuples {
                if t.subject_qid != *qid {
                    violations.push(format!(
                        "{id}: tuple {} filed under {qid} claims subject {}",
                        t.pid, t.subject_qid
                    ));
                }
                *holders.entry(t.pid.as_str()).or_insert(0) += 1;
            }
        }
        for (pid, n) in holders {
            if n >= 2 {
                violations.push(format!("{id}: property {pid} held by {n} members"));
            }
        }

        for (qid, tuples) in &self.members {
            let golds = self.gold_docs.get(qid);
            let entity_docs = self.entity_docs.get(qid).cloned().unwrap_or_default();
            for t in tuples {
                match golds.and_then(|g| g.get(&t.pid)) {
                    None => violations.push(format!(
                        "{id}: tuple {} of {qid} has no gold documents",
                        t.pid
                    )),
                    Some(docs) if docs.is_empty() => violations.push(format!(
                        "{id}: tuple {} of {qid} has an empty gold set",
                        t.pid
                    )),
                    Some(docs) => {
                        for doc in docs {
                            if !entity_docs.contains(doc) {
                                violations.push(format!(
                                    "{id}: gold document {doc} is not linked to {qid}"
                                ));
                            }
                        }
                    }
                }
            }
            let tuple_pids: BTreeSet<&String> = tuples.iter().map(|t| &t.pid).collect();
            if let Some(golds) = golds {
                for pid in golds.keys() {
                    if !tuple_pids.contains(pid) {
                        violations.push(format!(
                            "{id}: gold documents for absent tuple {pid} of {qid}"
                        ));
                    }
                }
            }
        }

        if self
            .members
            .get(&self.head_qid)
            .is_none_or(|tuples| tuples.is_empty())
        {
            violations.push(format!("{id}: head {} carries no facts", self.head_qid));
        }
        if !self
            .tail_qids
            .iter()
            .any(|t| self.members.get(t).is_some_and(|tu| !tu.is_empty()))
        {
            violations.push(format!("{id}: no tail carries facts"));
        }
        violations
    }

    /// Check conformance with a collection spec: member types admitted and
    /// every surviving property whitelisted.
    pub fn check_spec_conformance(
        &self,
        spec: &CollectionSpec,
        entities: &BTreeMap<String, EntityRecord>,
    ) -> Vec<String> {
        let mut violations = Vec::new();
        for (qid, tuples) in &self.members {
            let Some(entity) = entities.get(qid) else {
                violations.push(format!("{}: member {qid} unknown", self.set_id));
                continue;
            };
            if !spec.matches(entity) {
                violations.push(format!(
                    "{}: member {qid} has no admitted type",
                    self.set_id
                ));
            }
            let pids = spec.whitelisted_pids(entity);
            for t in tuples {
                if !pids.contains(&t.pid) {
                    violations.push(format!(
                        "{}: property {} of {qid} is not whitelisted",
                        self.set_id, t.pid
                    ));
                }
            }
        }
        violations
    }
}

/// Everything the builder consumes.
pub struct BuildInputs<'a> {
    /// Entities keyed by qid.
    pub entities: &'a BTreeMap<String, EntityRecord>,
    /// Alias index over those entities.
    pub aliases: &'a AliasIndex,
    /// Page-view counts.
    pub popularity: &'a PopularityTable,
    /// Document corpus.
    pub corpus: &'a DocumentIndex,
}

/// Stage counters reported after a build.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounters {
    /// Entities admitted by the type whitelist.
    pub entities_in_scope: usize,
    /// Distinct aliases in the index.
    pub aliases: usize,
    /// Aliases borne by two or more entities.
    pub polysemous_aliases: usize,
    /// Groups with two or more admitted bearers.
    pub candidate_groups: usize,
    /// Groups whose popularity gap reached the threshold.
    pub groups_past_gap: usize,
    /// Tuples surviving the property whitelist, over all candidate groups.
    pub tuples_whitelisted: usize,
    /// Tuples left after shared-property removal, over surviving groups.
    pub tuples_after_shared_removal: usize,
    /// Tuples with at least one verifying document.
    pub tuples_aligned: usize,
    /// Sets emitted.
    pub sets: usize,
    /// Member entities across emitted sets, counted per set.
    pub member_entities: usize,
    /// Members that still carry facts, counted per set.
    pub query_bearing_entities: usize,
}

struct GroupResult {
    set: Option<AmberSet>,
    tuples_whitelisted: usize,
    passed_gap: bool,
    tuples_after_shared: usize,
    tuples_aligned: usize,
}

fn build_set_for_group(
    spec: &CollectionSpec,
    group: &GroupCandidate,
    inputs: &BuildInputs,
) -> GroupResult {
    let mut members: BTreeMap<String, Vec<FactTuple>> = BTreeMap::new();
    for qid in &group.qids {
        let entity = &inputs.entities[qid];
        members.insert(qid.clone(), whitelisted_tuples(entity, spec));
    }
    let tuples_whitelisted = members.values().map(Vec::len).sum();

    let ordered = assign_head_tail(&group.qids, inputs.popularity);
    let head = &ordered[0];
    let top_tail = &ordered[1];
    let gap = popularity_gap(
        inputs.popularity.views(head),
        inputs.popularity.views(top_tail),
    )
    .expect("head outranks tails by construction");
    if gap < MIN_POPULARITY_GAP {
        return GroupResult {
            set: None,
            tuples_whitelisted,
            passed_gap: false,
            tuples_after_shared: 0,
            tuples_aligned: 0,
        };
    }

    remove_shared_properties(&mut members);
    let tuples_after_shared = members.values().map(Vec::len).sum();

    let mut gold_docs = BTreeMap::new();
    let mut entity_docs = BTreeMap::new();
    for (qid, tuples) in members.iter_mut() {
        let alignment = align_member(qid, tuples, inputs.corpus);
        entity_docs.insert(qid.clone(), alignment.entity_docs);
        if !alignment.gold_docs.is_empty() {
            gold_docs.insert(qid.clone(), alignment.gold_docs);
        }
    }
    let tuples_aligned = members.values().map(Vec::len).sum();

    let head_bears = members.get(head).is_some_and(|t| !t.is_empty());
    let any_tail_bears = ordered[1..]
        .iter()
        .any(|t| members.get(t).is_some_and(|tu| !tu.is_empty()));
    let set = (head_bears && any_tail_bears).then(|| AmberSet {
        set_id: set_id(&spec.name, &group.alias),
        collection: spec.name.clone(),
        name: group.alias.clone(),
        head_qid: head.clone(),
        tail_qids: ordered[1..].to_vec(),
        views: ordered
            .iter()
            .map(|q| (q.clone(), inputs.popularity.views(q)))
            .collect(),
        members,
        gold_docs,
        entity_docs,
    });

    GroupResult {
        set,
        tuples_whitelisted,
        passed_gap: true,
        tuples_after_shared,
        tuples_aligned,
    }
}

/// Run the full cascade for one collection. Sets come back in set_id
/// order; the same inputs always produce byte-identical output.
pub fn build_collection(
    inputs: &BuildInputs,
    spec: &CollectionSpec,
) -> Result<(Vec<AmberSet>, BuildCounters)> {
    let groups = candidate_groups(inputs.aliases, inputs.entities, spec);
    let results: Vec<GroupResult> = groups
        .par_iter()
        .map(|group| build_set_for_group(spec, group, inputs))
        .collect();

    let mut counters = BuildCounters {
        entities_in_scope: inputs
            .entities
            .values()
            .filter(|e| spec.matches(e))
            .count(),
        aliases: inputs.aliases.len(),
        polysemous_aliases: inputs.aliases.polysemous().count(),
        candidate_groups: groups.len(),
        ..BuildCounters::default()
    };
    let mut sets = Vec::new();
    for result in results {
        counters.tuples_whitelisted += result.tuples_whitelisted;
        if result.passed_gap {
            counters.groups_past_gap += 1;
            counters.tuples_after_shared_removal += result.tuples_after_shared;
            counters.tuples_aligned += result.tuples_aligned;
        }
        if let Some(set) = result.set {
            counters.sets += 1;
            counters.member_entities += set.members.len();
            counters.query_bearing_entities += set.query_bearing_members().count();
            sets.push(set);
        }
    }
    sets.sort_by(|a, b| a.set_id.cmp(&b.set_id));
    for pair in sets.windows(2) {
        if pair[0].set_id == pair[1].set_id {
            return Err(Error::Validation(format!(
                "set id collision: {:?} and {:?} both hash to {}",
                pair[0].name, pair[1].name, pair[0].set_id
            )));
        }
    }
    Ok((sets, counters))
}

/// Write sets as one JSON object per line.
pub fn write_sets(path: &Path, sets: &[AmberSet]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for set in sets {
        serde_json::to_writer(&mut w, set)
            .map_err(|e| Error::Validation(format!("cannot serialize set {}: {e}", set.set_id)))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read sets back from a JSONL file, checking every structural invariant.
pub fn read_sets(path: &Path) -> Result<Vec<AmberSet>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut sets = Vec::new();
    let mut violations = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: AmberSet = serde_json::from_str(&line)
            .map_err(|e| Error::parse(i + 1, format!("bad set record: {e}")).with_path(path))?;
        violations.extend(set.validate());
        sets.push(set);
    }
    if !violations.is_empty() {
        let shown = violations.iter().take(5).cloned().collect::<Vec<_>>();
        return Err(Error::Validation(format!(
            "{}: {} invariant violations, first: {}",
            path.display(),
            violations.len(),
            shown.join("; ")
        )));
    }
    Ok(sets)
}
