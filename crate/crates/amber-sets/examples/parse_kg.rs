//! Stream a knowledge-graph dump and inspect what came out.
//!
//! Run with `cargo run --example parse_kg`.

use std::path::Path;

use amber_sets::kg::{load_entities, parse_entity_record};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (entities, stats) = load_entities(&fixtures.join("kg.jsonl"))?;

    println!(
        "loaded {} entities ({} duplicate tuples dropped)",
        stats.entities, stats.duplicate_tuples
    );

    let lincoln = &entities["Q91"];
    println!("\n{} ({})", lincoln.canonical_name, lincoln.qid);
    println!("  types:   {:?}", lincoln.type_tags);
    println!("  aliases: {:?}", lincoln.aliases);
    for tuple in &lincoln.tuples {
        println!(
            "  {} ({}) = {}",
            tuple.property_label, tuple.pid, tuple.value_text
        );
    }

    // Malformed lines fail with the line number, not a panic.
    let bad = r#"{"qid": "", "name": "Nameless"}"#;
    match parse_entity_record(bad, 7) {
        Ok(_) => unreachable!(),
        Err(err) => println!("\nrejected bad line as expected: {err}"),
    }
    Ok(())
}
