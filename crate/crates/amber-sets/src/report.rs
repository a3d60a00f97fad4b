//! Report rendering: a readable table, a flat CSV, and JSON lines.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::{Frac, MetricsReport};

/// Output format for rendered reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Fixed-width table for terminals.
    Table,
    /// Flat `section,task,k,bin,split,hits,total,value` rows.
    Csv,
    /// One self-contained JSON record per line.
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" => Ok(ReportFormat::JsonLines),
            other => Err(Error::Config(format!(
                "unknown report format {other:?}, expected table, csv, or json-lines"
            ))),
        }
    }
}

/// Render a report in the requested format.
pub fn render(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::JsonLines => render_json_lines(report),
    }
}

fn cell(f: &Frac) -> String {
    format!("{:.3} ({}/{})", f.value, f.hits, f.total)
}

/// Fixed-width table with accuracy, confusion, and gap sections.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "run {}  (cutoff k = {})", report.run_id, report.k).unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "{:<5} {:>8} {:>10} {:>4} {:>16} {:>16} {:>16} {:>16}",
        "task", "queries", "metric", "k", "all", "head", "tail", "all-correct"
    )
    .unwrap();
    for (task, metrics) in &report.tasks {
        for row in &metrics.accuracy {
            writeln!(
                w,
                "{:<5} {:>8} {:>10} {:>4} {:>16} {:>16} {:>16} {:>16}",
                task,
                metrics.queries,
                "accuracy",
                row.k,
                cell(&row.all),
                cell(&row.head),
                cell(&row.tail),
                cell(&row.all_correct)
            )
            .unwrap();
        }
        let c = &metrics.confusion;
        writeln!(
            w,
            "{:<5} {:>8} {:>10} {:>4} {:>16} {:>16} {:>16} {:>16}",
            task,
            metrics.queries,
            "confusion",
            "-",
            cell(&c.all),
            cell(&c.head),
            cell(&c.tail),
            "-"
        )
        .unwrap();
    }
    if !report.gap_bins.is_empty() {
        writeln!(w).unwrap();
        writeln!(w, "popularity gap versus accuracy at rank 1").unwrap();
        writeln!(
            w,
            "{:<5} {:>8} {:>6} {:>16} {:>16} {:>8}",
            "task", "bin", "pairs", "head", "tail", "diff"
        )
        .unwrap();
        for (task, rows) in &report.gap_bins {
            for row in rows {
                writeln!(
                    w,
                    "{:<5} {:>8} {:>6} {:>16} {:>16} {:>8.3}",
                    task,
                    row.label,
                    row.support,
                    cell(&row.head),
                    cell(&row.tail),
                    row.diff
                )
                .unwrap();
            }
        }
    }
    if !report.warnings.is_empty() {
        writeln!(w).unwrap();
        writeln!(w, "warnings:").unwrap();
        for warning in &report.warnings {
            writeln!(w, "  - {warning}").unwrap();
        }
    }
    out
}

/// CSV header used by [`render_csv`].
pub const CSV_HEADER: &str = "section,task,k,bin,split,hits,total,value";

fn csv_frac(out: &mut String, section: &str, task: &str, k: &str, bin: &str, split: &str, f: &Frac) {
    writeln!(
        out,
        "{section},{task},{k},{bin},{split},{},{},{}",
        f.hits, f.total, f.value
    )
    .unwrap();
}

/// Flat CSV: every row is `section,task,k,bin,split,hits,total,value`.
/// Gap rows add `diff` and `support` splits whose number sits in the
/// value column.
pub fn render_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for (task, metrics) in &report.tasks {
        for row in &metrics.accuracy {
            let k = row.k.to_string();
            csv_frac(&mut out, "accuracy", task, &k, "", "all", &row.all);
            csv_frac(&mut out, "accuracy", task, &k, "", "head", &row.head);
            csv_frac(&mut out, "accuracy", task, &k, "", "tail", &row.tail);
            csv_frac(&mut out, "accuracy", task, &k, "", "all_correct", &row.all_correct);
        }
        let c = &metrics.confusion;
        csv_frac(&mut out, "confusion", task, "", "", "all", &c.all);
        csv_frac(&mut out, "confusion", task, "", "", "head", &c.head);
        csv_frac(&mut out, "confusion", task, "", "", "tail", &c.tail);
    }
    for (task, rows) in &report.gap_bins {
        for row in rows {
            csv_frac(&mut out, "gap", task, "1", &row.label, "head", &row.head);
            csv_frac(&mut out, "gap", task, "1", &row.label, "tail", &row.tail);
            writeln!(out, "gap,{task},1,{},diff,,,{}", row.label, row.diff).unwrap();
            writeln!(out, "gap,{task},1,{},support,,,{}", row.label, row.support).unwrap();
        }
    }
    out
}

/// Wide per-bin CSV meant for plotting the gap tables.
pub fn render_gap_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "task,bin,lower,upper,head_hits,head_total,head_value,\
         tail_hits,tail_total,tail_value,diff,support"
    )
    .unwrap();
    for (task, rows) in &report.gap_bins {
        for row in rows {
            let upper = row.upper.map(|u| u.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{task},{},{},{upper},{},{},{},{},{},{},{},{}",
                row.label,
                row.lower,
                row.head.hits,
                row.head.total,
                row.head.value,
                row.tail.hits,
                row.tail.total,
                row.tail.value,
                row.diff,
                row.support
            )
            .unwrap();
        }
    }
    out
}

/// One JSON record per line: a `run` header, then `accuracy`,
/// `confusion`, `gap_bin`, and `warning` records.
pub fn render_json_lines(report: &MetricsReport) -> String {
    let mut lines = Vec::new();
    lines.push(json!({"record": "run", "run_id": report.run_id, "k": report.k}).to_string());
    for (task, metrics) in &report.tasks {
        for row in &metrics.accuracy {
            lines.push(
                json!({
                    "record": "accuracy",
                    "task": task,
                    "k": row.k,
                    "all": row.all,
                    "head": row.head,
                    "tail": row.tail,
                    "all_correct": row.all_correct,
                })
                .to_string(),
            );
        }
        lines.push(
            json!({
                "record": "confusion",
                "task": task,
                "all": metrics.confusion.all,
                "head": metrics.confusion.head,
                "tail": metrics.confusion.tail,
            })
            .to_string(),
        );
    }
    for (task, rows) in &report.gap_bins {
        for row in rows {
            lines.push(
                json!({
                    "record": "gap_bin",
                    "task": task,
                    "label": row.label,
                    "lower": row.lower,
                    "upper": row.upper,
                    "head": row.head,
                    "tail": row.tail,
                    "diff": row.diff,
                    "support": row.support,
                })
                .to_string(),
            );
        }
    }
    for warning in &report.warnings {
        lines.push(json!({"record": "warning", "message": warning}).to_string());
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{AccuracyRow, ConfusionRow, GapBinRow, TaskMetrics};
    use std::collections::BTreeMap;

    fn sample_report() -> MetricsReport {
        let mut tasks = BTreeMap::new();
        tasks.insert(
            "qa".to_string(),
            TaskMetrics {
                queries: 3,
                accuracy: vec![
                    AccuracyRow {
                        k: 1,
                        all: Frac::new(1, 3),
                        head: Frac::new(1, 1),
                        tail: Frac::new(0, 2),
                        all_correct: Frac::new(0, 1),
                    },
                    AccuracyRow {
                        k: 20,
                        all: Frac::new(3, 3),
                        head: Frac::new(1, 1),
                        tail: Frac::new(2, 2),
                        all_correct: Frac::new(1, 1),
                    },
                ],
                confusion: ConfusionRow {
                    all: Frac::new(2, 3),
                    head: Frac::new(0, 1),
                    tail: Frac::new(2, 2),
                },
            },
        );
        let mut gap_bins = BTreeMap::new();
        gap_bins.insert(
            "qa".to_string(),
            vec![
                GapBinRow {
                    label: "0-20%".into(),
                    lower: 0.0,
                    upper: Some(0.2),
                    head: Frac::new(0, 0),
                    tail: Frac::new(0, 0),
                    diff: 0.0,
                    support: 0,
                },
                GapBinRow {
                    label: "100%+".into(),
                    lower: 1.0,
                    upper: None,
                    head: Frac::new(1, 1),
                    tail: Frac::new(0, 2),
                    diff: 1.0,
                    support: 1,
                },
            ],
        );
        MetricsReport {
            run_id: "tfidf".into(),
            k: 20,
            tasks,
            gap_bins,
            warnings: vec!["one query had no ranking".into()],
        }
    }

    #[test]
    fn format_names_parse() {
        assert_eq!("table".parse::<ReportFormat>().unwrap(), ReportFormat::Table);
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert_eq!(
            "json-lines".parse::<ReportFormat>().unwrap(),
            ReportFormat::JsonLines
        );
        let err = "yaml".parse::<ReportFormat>().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn table_lists_every_section() {
        let text = render_table(&sample_report());
        assert!(text.contains("run tfidf"));
        assert!(text.contains("accuracy"));
        assert!(text.contains("confusion"));
        assert!(text.contains("100%+"));
        assert!(text.contains("0.333 (1/3)"));
        assert!(text.contains("warnings:"));
    }

    #[test]
    fn csv_round_trips_numbers() {
        let report = sample_report();
        let text = render_csv(&report);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        // 2 accuracy rows x 4 splits + 3 confusion + 2 bins x 4 rows.
        assert_eq!(rows.len(), 19);

        let acc_all = rows
            .iter()
            .find(|r| r[0] == "accuracy" && r[2] == "1" && r[4] == "all")
            .unwrap();
        assert_eq!(acc_all[5].parse::<usize>().unwrap(), 1);
        assert_eq!(acc_all[6].parse::<usize>().unwrap(), 3);
        assert_eq!(acc_all[7].parse::<f64>().unwrap(), 1.0 / 3.0);

        let diff = rows
            .iter()
            .find(|r| r[0] == "gap" && r[3] == "100%+" && r[4] == "diff")
            .unwrap();
        assert_eq!(diff[7].parse::<f64>().unwrap(), 1.0);
        let support = rows
            .iter()
            .find(|r| r[0] == "gap" && r[3] == "100%+" && r[4] == "support")
            .unwrap();
        assert_eq!(support[7].parse::<usize>().unwrap(), 1);
    }

    #[test]
    fn gap_csv_is_wide() {
        let text = render_gap_csv(&sample_report());
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("task,bin,lower,upper"));
        let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row[1], "100%+");
        assert_eq!(row[3], "", "unbounded bin leaves upper empty");
        assert_eq!(row[11], "1");
    }

    #[test]
    fn json_lines_parse_individually() {
        let text = render_json_lines(&sample_report());
        let values: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(values[0]["record"], "run");
        assert!(values.iter().any(|v| v["record"] == "accuracy"));
        assert!(values.iter().any(|v| v["record"] == "gap_bin"));
        assert!(values.iter().any(|v| v["record"] == "warning"));
    }

    #[test]
    fn empty_report_renders_gracefully() {
        let report = MetricsReport {
            run_id: "none".into(),
            k: 5,
            tasks: BTreeMap::new(),
            gap_bins: BTreeMap::new(),
            warnings: Vec::new(),
        };
        assert_eq!(render_csv(&report).lines().count(), 1, "header only");
        assert!(render_table(&report).contains("run none"));
        assert_eq!(render_json_lines(&report).lines().count(), 1);
    }
}
