//! Rendering of persisted results: the per-document scaling table, coverage
//! CSV exports, and coverage histogram SVG bar charts. Rendering never
//! computes statistics; it only formats what earlier stages persisted.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use factgen_core::coverage::CoverageReport;
use factgen_core::stats::round_half_even;

use crate::eval::AccuracyReport;

/// Column order of the scaling table.
pub const SCALING_COLUMNS: [&str; 5] = ["original", "1x", "5x", "10x", "rag"];

/// Render the accuracy grid: rows are documents, columns original/1x/5x/10x/
/// RAG, each cell "acc [lo, hi]". Missing cells render as "—".
pub fn render_scaling_table(grid: &BTreeMap<String, BTreeMap<String, AccuracyReport>>) -> String {
    let mut out = String::new();
    out.push_str("document");
    for column in SCALING_COLUMNS {
        out.push('\t');
        out.push_str(column);
    }
    out.push('\n');
    for (doc, cells) in grid {
        out.push_str(doc);
        for column in SCALING_COLUMNS {
            out.push('\t');
            match cells.get(column) {
                Some(report) => {
                    let _ = write!(
                        out,
                        "{:.3} [{:.3}, {:.3}]",
                        round_half_even(report.accuracy, 3),
                        round_half_even(report.wilson_95.0, 3),
                        round_half_even(report.wilson_95.1, 3),
                    );
                }
                None => out.push('—'),
            }
        }
        out.push('\n');
    }
    out
}

/// CSV export of a coverage report: one "fact_id,count" row per fact, in
/// fact order.
pub fn coverage_csv(report: &CoverageReport) -> String {
    let mut out = String::from("fact_id,count\n");
    for (fact_id, count) in &report.per_fact_question_counts {
        let _ = writeln!(out, "{fact_id},{count}");
    }
    out
}

const SVG_BAR_WIDTH: usize = 12;
const SVG_BAR_GAP: usize = 3;
const SVG_PLOT_HEIGHT: usize = 220;
const SVG_MARGIN: usize = 30;

/// Bar chart of per-fact question counts in fact order, one bar per fact.
pub fn coverage_svg(report: &CoverageReport, title: &str) -> String {
    let n = report.per_fact_question_counts.len();
    let width = SVG_MARGIN * 2 + n * (SVG_BAR_WIDTH + SVG_BAR_GAP);
    let height = SVG_PLOT_HEIGHT + SVG_MARGIN * 2;
    let max = report.max_questions_single_fact.max(1);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(
        out,
        "  <text x=\"{SVG_MARGIN}\" y=\"18\" font-size=\"12\">{title}</text>"
    );
    // axes
    let base_y = SVG_PLOT_HEIGHT + SVG_MARGIN;
    let _ = writeln!(
        out,
        "  <line x1=\"{SVG_MARGIN}\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" stroke=\"black\"/>",
        width - SVG_MARGIN
    );
    let _ = writeln!(
        out,
        "  <line x1=\"{SVG_MARGIN}\" y1=\"{SVG_MARGIN}\" x2=\"{SVG_MARGIN}\" y2=\"{base_y}\" stroke=\"black\"/>"
    );
    for (i, (fact_id, &count)) in report.per_fact_question_counts.iter().enumerate() {
        let bar_height = count * SVG_PLOT_HEIGHT / max;
        let x = SVG_MARGIN + i * (SVG_BAR_WIDTH + SVG_BAR_GAP);
        let y = base_y - bar_height;
        let _ = writeln!(
            out,
            "  <rect x=\"{x}\" y=\"{y}\" width=\"{SVG_BAR_WIDTH}\" height=\"{bar_height}\" \
             fill=\"steelblue\"><title>{fact_id}: {count}</title></rect>"
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(counts: &[(&str, usize)]) -> CoverageReport {
        let per_fact: BTreeMap<String, usize> =
            counts.iter().map(|(id, c)| (id.to_string(), *c)).collect();
        let max = per_fact.values().copied().max().unwrap_or(0);
        let covered = per_fact.values().filter(|&&c| c > 0).count();
        let n = per_fact.len();
        let mut bins = vec![0usize; max + 1];
        for &c in per_fact.values() {
            bins[c] += 1;
        }
        CoverageReport {
            threshold: 0.945,
            fact_count: n,
            covered_count: covered,
            uncovered_fraction: if n == 0 {
                0.0
            } else {
                1.0 - covered as f64 / n as f64
            },
            per_fact_question_counts: per_fact,
            max_questions_single_fact: max,
            histogram_bins: bins,
        }
    }

    fn accuracy(acc: f64) -> AccuracyReport {
        AccuracyReport {
            n: 100,
            correct: (acc * 100.0) as usize,
            accuracy: acc,
            wilson_95: (acc - 0.05, acc + 0.05),
            ungradable: 0,
            errored: 0,
            per_section: BTreeMap::new(),
            per_fact: BTreeMap::new(),
            manifest_digest: "d".into(),
            source: "fixture".into(),
        }
    }

    #[test]
    fn missing_cells_render_as_dash() {
        let mut grid = BTreeMap::new();
        let mut cells = BTreeMap::new();
        cells.insert("1x".to_string(), accuracy(0.5));
        grid.insert("doc-a".to_string(), cells);
        let table = render_scaling_table(&grid);
        let row = table.lines().nth(1).unwrap();
        assert!(row.starts_with("doc-a\t—\t0.500"));
        assert_eq!(row.matches('—').count(), 4);
    }

    #[test]
    fn full_grid_renders_all_cells() {
        let mut grid = BTreeMap::new();
        for doc in ["a", "b", "c", "d", "e", "f"] {
            let mut cells = BTreeMap::new();
            for column in SCALING_COLUMNS {
                cells.insert(column.to_string(), accuracy(0.4));
            }
            grid.insert(doc.to_string(), cells);
        }
        let table = render_scaling_table(&grid);
        assert_eq!(table.lines().count(), 7);
        assert_eq!(table.matches("0.400").count(), 30);
        assert_eq!(table.matches('—').count(), 0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut grid = BTreeMap::new();
        grid.insert(
            "doc".to_string(),
            BTreeMap::from([("rag".to_string(), accuracy(0.3))]),
        );
        assert_eq!(render_scaling_table(&grid), render_scaling_table(&grid));
    }

    #[test]
    fn csv_row_count_equals_fact_count() {
        let r = report(&[("f0", 2), ("f1", 0), ("f2", 5)]);
        let csv = coverage_csv(&r);
        assert_eq!(csv.lines().count(), 1 + r.fact_count);
        assert!(csv.contains("f1,0\n"));
    }

    #[test]
    fn svg_has_one_bar_per_fact() {
        let r = report(&[("f0", 3), ("f1", 1), ("f2", 0)]);
        let svg = coverage_svg(&r, "coverage");
        assert_eq!(svg.matches("<rect").count(), 3);
        // zero-count facts draw a zero-height bar
        assert!(svg.contains("height=\"0\""));
    }

    #[test]
    fn empty_report_renders_axes_only() {
        let r = report(&[]);
        let svg = coverage_svg(&r, "empty");
        assert_eq!(svg.matches("<rect").count(), 0);
        assert_eq!(svg.matches("<line").count(), 2);
    }
}
