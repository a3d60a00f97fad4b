//! Find names shared by several entities, the seed of every ambiguity set.
//!
//! Run with `cargo run --example alias_groups`.

use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (entities, _) = load_entities(&fixtures.join("kg.jsonl"))?;
    let index = build_alias_index(entities.values());

    println!("{} distinct names and aliases", index.len());
    println!("\npolysemous names:");
    for (alias, bearers) in index.polysemous() {
        println!("  {alias:20} -> {}", bearers.iter().cloned().collect::<Vec<_>>().join(", "));
        for qid in bearers {
            let e = &entities[qid];
            println!("    {qid:12} {} {:?}", e.canonical_name, e.type_tags);
        }
    }

    // A name is only ambiguous if at least two entities bear it.
    assert!(index.polysemous().all(|(_, bearers)| bearers.len() >= 2));
    Ok(())
}
