//! The whole pipeline in one pass: build sets, generate queries, run
//! tf-idf retrieval, evaluate, and render the reports.
//!
//! Equivalent to `amber all`, but driven through the library API with
//! the output redirected to a temporary directory.
//!
//! Run with `cargo run --example end_to_end`.

use std::path::Path;

use amber_sets::pipeline::{
    run_build, run_evaluate, run_generate, run_retrieve, PipelineConfig,
};
use amber_sets::{render, ReportFormat};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let outdir = tempfile::tempdir()?;

    let mut config = PipelineConfig::load(&fixtures.join("pipeline.toml"))?;
    config.outdir = outdir.path().to_path_buf();

    let build = run_build(&config)?;
    for (name, counters) in &build.collections {
        println!(
            "built {name}: {} sets from {} entities in scope",
            counters.sets, counters.entities_in_scope
        );
    }

    let generate = run_generate(&config)?;
    for (name, counters) in &generate.collections {
        println!(
            "generated {name}: {} qa + {} sf + {} fc queries",
            counters.qa_queries, counters.sf_queries, counters.fc_queries
        );
    }

    let retrieve = run_retrieve(&config)?;
    for (name, ranked) in &retrieve.collections {
        println!("retrieved {name}: {ranked} rankings at k = {}", config.k);
    }

    let evaluate = run_evaluate(&config, None)?;
    for (name, report) in &evaluate.collections {
        println!("\ncollection {name}");
        print!("{}", render(report, ReportFormat::Table));
    }

    println!("\nartifacts under {}:", config.outdir.display());
    let mut paths = walk(&config.outdir)?;
    paths.sort();
    for p in paths {
        println!("  {}", p.strip_prefix(&config.outdir)?.display());
    }
    Ok(())
}

fn walk(dir: &Path) -> anyhow::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            out.extend(walk(&path)?);
        } else {
            out.push(path);
        }
    }
    Ok(out)
}
