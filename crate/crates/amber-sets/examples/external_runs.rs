//! Exchange rankings with external retrievers via run files.
//!
//! A run file holds one ranking per query. Any retriever can produce
//! one; evaluation only needs the ranked doc_ids.
//!
//! Run with `cargo run --example external_runs`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};
use amber_sets::queries::GlobalValueStats;
use amber_sets::retrieval::batch_retrieve;
use amber_sets::sets::load_collections;
use amber_sets::{
    build_collection, generate_queries, BuildInputs, DocumentIndex, PopularityTable,
    RetrieverRun, SparseIndex, TemplateBank,
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
    let union_pids = specs.iter().flat_map(|s| s.all_pids()).collect();
    let stats = GlobalValueStats::collect(entities.values(), &union_pids);
    let inputs = BuildInputs {
        entities: &entities,
        aliases: &aliases,
        popularity: &popularity,
        corpus: &corpus,
    };

    let mut known = BTreeSet::new();
    let mut all_queries = Vec::new();
    for spec in &specs {
        let (sets, _) = build_collection(&inputs, spec)?;
        let (queries, _) = generate_queries(&sets, &bank, &stats)?;
        known.extend(queries.all().map(|q| q.query_id.clone()));
        all_queries.extend(queries.all().cloned());
    }

    // The bundled run covers every fixture query; loading validates ids
    // and rejects duplicate documents inside a ranking.
    let bundled = RetrieverRun::load(&fixtures.join("external_run.jsonl"), "bundled", &known)?;
    println!("bundled run: {} rankings", bundled.rankings.len());
    let (qid, ranking) = bundled.rankings.iter().next().unwrap();
    println!("  {qid}\n    -> {ranking:?}");

    // Producing a run is one call for the built-in retriever.
    let index = SparseIndex::build(&corpus)?;
    let tfidf = batch_retrieve(&index, &all_queries, 5, "tfidf");
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("tfidf.jsonl");
    tfidf.write(&path)?;
    let reloaded = RetrieverRun::load(&path, "tfidf", &known)?;
    println!("\nwrote and reloaded {} tf-idf rankings", reloaded.rankings.len());

    // Unknown query ids are refused: stale runs never silently score 0.
    let stale = dir.path().join("stale.jsonl");
    fs::write(&stale, "{\"query_id\": \"feedbeef:Q1:P1:qa\", \"ranked_doc_ids\": [\"Napoleon\"]}\n")?;
    match RetrieverRun::load(&stale, "stale", &known) {
        Ok(_) => unreachable!(),
        Err(err) => println!("\nstale run rejected: {err}"),
    }
    Ok(())
}
