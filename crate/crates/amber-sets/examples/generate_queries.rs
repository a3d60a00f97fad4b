//! Turn compiled sets into task queries: questions, slot-filling
//! inputs, and supported/refuted claim pairs.
//!
//! Run with `cargo run --example generate_queries`.

use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};
use amber_sets::queries::GlobalValueStats;
use amber_sets::sets::load_collections;
use amber_sets::{
    build_collection, generate_queries, BuildInputs, DocumentIndex, PopularityTable,
    TemplateBank,
};

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixtures = root.join("fixtures");

    let (entities, _) = load_entities(&fixtures.join("kg.jsonl"))?;
    let aliases = build_alias_index(entities.values());
    let popularity = PopularityTable::load(&fixtures.join("pageviews.tsv"))?;
    let corpus = DocumentIndex::load(&fixtures.join("corpus.jsonl"))?;
    let specs = load_collections(&root.join("config/collections.toml"))?;
    let bank = TemplateBank::load(&root.join("config/templates.toml"))?;

    // Refuted claims substitute the most frequent other value seen for a
    // property anywhere in the graph, so the stats scan every entity.
    let union_pids = specs.iter().flat_map(|s| s.all_pids()).collect();
    let stats = GlobalValueStats::collect(entities.values(), &union_pids);

    let inputs = BuildInputs {
        entities: &entities,
        aliases: &aliases,
        popularity: &popularity,
        corpus: &corpus,
    };

    for spec in &specs {
        let (sets, _) = build_collection(&inputs, spec)?;
        let (queries, counters) = generate_queries(&sets, &bank, &stats)?;
        println!(
            "collection {}: {} qa, {} sf, {} fc ({} claim pairs skipped)",
            spec.name,
            counters.qa_queries,
            counters.sf_queries,
            counters.fc_queries,
            counters.fc_pairs_skipped,
        );
        for q in queries.all().take(6) {
            println!("  {:6} {:40} -> {}", q.task.to_string(), q.query_id, q.input);
            println!("         answer: {}  gold: {:?}", q.answer, q.gold_doc_ids);
        }
        println!();
    }
    Ok(())
}
