//! Compile ambiguity sets for one collection, straight from the inputs.
//!
//! Shows the whole cascade: type and property whitelists, the popularity
//! gap, removal of properties shared inside a set, and evidence
//! alignment against document prefixes.
//!
//! Run with `cargo run --example build_sets`.

use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};
use amber_sets::sets::load_collections;
use amber_sets::{build_collection, BuildInputs, DocumentIndex, PopularityTable};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixtures = root.join("fixtures");

    let (entities, _) = load_entities(&fixtures.join("kg.jsonl"))?;
    let aliases = build_alias_index(entities.values());
    let popularity = PopularityTable::load(&fixtures.join("pageviews.tsv"))?;
    let corpus = DocumentIndex::load(&fixtures.join("corpus.jsonl"))?;
    let specs = load_collections(&root.join("config/collections.toml"))?;

    let inputs = BuildInputs {
        entities: &entities,
        aliases: &aliases,
        popularity: &popularity,
        corpus: &corpus,
    };

    for spec in &specs {
        let (sets, counters) = build_collection(&inputs, spec)?;
        println!("collection {}: {} sets", spec.name, sets.len());
        println!(
            "  tuples {} whitelisted -> {} after shared-property removal -> {} aligned",
            counters.tuples_whitelisted,
            counters.tuples_after_shared_removal,
            counters.tuples_aligned,
        );
        for set in &sets {
            println!("  [{}] {:?}", set.set_id, set.name);
            for (qid, tuples) in &set.members {
                let role = if set.is_head(qid) { "head" } else { "tail" };
                let facts: Vec<&str> = tuples.iter().map(|t| t.pid.as_str()).collect();
                let note = if facts.is_empty() { "distractor".into() } else { facts.join(" ") };
                println!("    {role:4} {qid:12} {:8} views  {note}", set.views[qid]);
            }
        }
    }
    Ok(())
}
