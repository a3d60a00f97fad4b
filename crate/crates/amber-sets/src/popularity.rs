//! Entity popularity: page-view counts, the relative popularity gap, and the
//! gap bins used in evaluation reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::error::{io_err, Error, Result};

/// Minimum relative popularity gap between a head entity and its most
/// popular tail for a group to stay in the pipeline.
pub const MIN_POPULARITY_GAP: f64 = 0.10;

/// Page-view counts keyed by qid.
///
/// Entities absent from the table count as zero views.
#[derive(Debug, Default, Clone)]
pub struct PopularityTable {
    views: BTreeMap<String, u64>,
}

impl PopularityTable {
    /// Load a tab-separated `qid<TAB>views` file.
    ///
    /// Lines starting with `#` and blank lines are skipped. A qid listed
    /// more than once accumulates the sum of its counts.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut table = PopularityTable::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let line_no = i + 1;
            let mut fields = trimmed.split('\t');
            let qid = fields.next().unwrap_or_default().trim();
            let count = fields.next().map(str::trim);
            let (qid, count) = match (qid, count) {
                (q, Some(c)) if !q.is_empty() && !c.is_empty() => (q, c),
                _ => {
                    return Err(Error::parse(
                        line_no,
                        format!("expected \"qid<TAB>views\", got {trimmed:?}"),
                    )
                    .with_path(path))
                }
            };
            let count: u64 = count.parse().map_err(|_| {
                Error::parse(line_no, format!("bad view count {count:?} for {qid}"))
                    .with_path(path)
            })?;
            *table.views.entry(qid.to_string()).or_insert(0) += count;
        }
        Ok(table)
    }

    /// Record a count, accumulating on repeats.
    pub fn insert(&mut self, qid: &str, views: u64) {
        *self.views.entry(qid.to_string()).or_insert(0) += views;
    }

    /// Views for an entity; zero when unlisted.
    pub fn views(&self, qid: &str) -> u64 {
        self.views.get(qid).copied().unwrap_or(0)
    }

    /// Number of listed entities.
    pub fn len(&self) -> usize {
        self.views.len()
    }

    /// True when no entity is listed.
    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

/// Relative popularity gap `(head - tail) / tail`.
///
/// A zero-view tail yields infinity. Callers must pass `head >= tail`;
/// anything else is a validation error, not a negative gap.
pub fn popularity_gap(head_views: u64, tail_views: u64) -> Result<f64> {
    if head_views < tail_views {
        return Err(Error::Validation(format!(
            "popularity gap needs head >= tail, got {head_views} < {tail_views}"
        )));
    }
    if tail_views == 0 {
        return Ok(f64::INFINITY);
    }
    Ok((head_views - tail_views) as f64 / tail_views as f64)
}

/// Order entities by popularity: views descending, qid ascending on ties.
/// The first element is the head.
pub fn assign_head_tail(qids: &[String], table: &PopularityTable) -> Vec<String> {
    let mut ordered: Vec<String> = qids.to_vec();
    ordered.sort_by(|a, b| {
        table
            .views(b)
            .cmp(&table.views(a))
            .then_with(|| a.cmp(b))
    });
    ordered
}

/// One half-open popularity-gap interval `[lower, upper)`.
///
/// `upper` of `None` means unbounded, for the final overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapBin {
    /// Inclusive lower edge.
    pub lower: f64,
    /// Exclusive upper edge; `None` for the unbounded top bin.
    pub upper: Option<f64>,
    /// Human-readable label, e.g. "0-20%".
    pub label: String,
}

impl GapBin {
    /// True when `gap` falls in this bin.
    pub fn contains(&self, gap: f64) -> bool {
        gap >= self.lower && self.upper.is_none_or(|u| gap < u)
    }
}

/// The report's six gap bins: five 20%-wide bins and an unbounded bin for
/// gaps above 100%.
pub fn default_gap_bins() -> Vec<GapBin> {
    let mut bins: Vec<GapBin> = (0..5)
        .map(|i| GapBin {
            lower: i as f64 * 0.2,
            upper: Some((i + 1) as f64 * 0.2),
            label: format!("{}-{}%", i * 20, (i + 1) * 20),
        })
        .collect();
    bins.push(GapBin {
        lower: 1.0,
        upper: None,
        label: "100%+".to_string(),
    });
    bins
}

/// Index of the bin holding `gap`, if any. Gaps are nonnegative, so with
/// the default bins only NaN misses.
pub fn bin_index(bins: &[GapBin], gap: f64) -> Option<usize> {
    bins.iter().position(|b| b.contains(gap))
}
