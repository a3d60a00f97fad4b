//! Rank name-sharing entities by page views and apply the gap filter.
//!
//! A group survives only when the most viewed member ("head") beats the
//! most viewed of the rest ("tails") by at least 10% relative views.
//!
//! Run with `cargo run --example popularity_gaps`.

use std::path::Path;

use amber_sets::kg::{build_alias_index, load_entities};
use amber_sets::popularity::{assign_head_tail, bin_index, default_gap_bins};
use amber_sets::{popularity_gap, PopularityTable, MIN_POPULARITY_GAP};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (entities, _) = load_entities(&fixtures.join("kg.jsonl"))?;
    let views = PopularityTable::load(&fixtures.join("pageviews.tsv"))?;
    let index = build_alias_index(entities.values());
    let bins = default_gap_bins();

    println!("minimum relative gap: {MIN_POPULARITY_GAP}");
    for (alias, bearers) in index.polysemous() {
        let qids: Vec<String> = bearers.iter().cloned().collect();
        let ordered = assign_head_tail(&qids, &views);
        let head = &ordered[0];
        let top_tail = &ordered[1];
        let gap = popularity_gap(views.views(head), views.views(top_tail))?;
        let verdict = if gap >= MIN_POPULARITY_GAP { "keep" } else { "drop" };
        let label = bin_index(&bins, gap).map_or("-", |i| bins[i].label.as_str());
        println!(
            "{alias:12} head {head} ({} views) vs {top_tail} ({} views): gap {gap:.2} [{label}] -> {verdict}",
            views.views(head),
            views.views(top_tail),
        );
    }
    Ok(())
}
