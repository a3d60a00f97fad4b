//! Score queries against the corpus with the built-in tf-idf retriever.
//!
//! Run with `cargo run --example tfidf_retrieval`.

use std::path::Path;

use amber_sets::{DocumentIndex, SparseIndex};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = DocumentIndex::load(&fixtures.join("corpus.jsonl"))?;
    let index = SparseIndex::build(&corpus)?;

    println!(
        "indexed {} documents, {} terms",
        index.doc_count(),
        index.vocab_size()
    );

    for query in [
        "Which war did Abe Lincoln fight?",
        "What instrument does Abe Lincoln play?",
        "Apple record label",
        "population of Aurora",
    ] {
        println!("\n{query}");
        for hit in index.retrieve(query, 3) {
            println!("  {:<40} {:.4}", hit.doc_id, hit.score);
        }
    }

    // Out-of-vocabulary terms are dropped rather than poisoning scores;
    // a fully unknown query scores zero everywhere and ranks by doc_id.
    let nonsense = index.retrieve("zzz qqq", 2);
    println!("\nunknown-term query scores: {:?}", nonsense);
    Ok(())
}
