//! Score a retriever run: accuracy by split, entity confusion, and the
//! popularity-gap table.
//!
//! The bundled run is deliberately head-biased: every head query gets
//! its gold document first, every tail query gets the head's document
//! first and gold second. The report shows the resulting picture.
//!
//! Run with `cargo run --example evaluate_run`.

use std::collections::BTreeSet;
use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};
use amber_sets::queries::GlobalValueStats;
use amber_sets::sets::load_collections;
use amber_sets::{
    build_collection, evaluate, generate_queries, render, BuildInputs, DocumentIndex,
    EvalOptions, PopularityTable, ReportFormat, RetrieverRun, TemplateBank,
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

    // The bundled run spans every collection, so id validation needs the
    // union of query ids even though only one collection gets scored.
    let mut known = BTreeSet::new();
    let mut human = None;
    for spec in &specs {
        let (sets, _) = build_collection(&inputs, spec)?;
        let (queries, _) = generate_queries(&sets, &bank, &stats)?;
        known.extend(queries.all().map(|q| q.query_id.clone()));
        if spec.name == "human" {
            human = Some((sets, queries));
        }
    }
    let (sets, queries) = human.expect("fixture collections include human");

    let run = RetrieverRun::load(&fixtures.join("external_run.jsonl"), "head-biased", &known)?;
    let report = evaluate(&sets, &queries, &run, &EvalOptions { k: 5, strict: false })?;

    print!("{}", render(&report, ReportFormat::Table));

    // The head bias is visible in the numbers: perfect heads at rank 1,
    // fully confused tails that recover by rank 5.
    let qa = &report.tasks["qa"];
    assert_eq!(qa.accuracy[0].head.value, 1.0);
    assert_eq!(qa.accuracy[0].tail.value, 0.0);
    assert_eq!(qa.accuracy[1].tail.value, 1.0);
    assert_eq!(qa.confusion.tail.value, 1.0);
    Ok(())
}
