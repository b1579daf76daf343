//! Report emission: a flat CSV (one row per model and category) and a
//! Markdown rendering with a metric grid and a timing grid.

use std::fmt::Write as _;
use std::path::Path;

use edtweetlab_core::eval::{EvalReport, ReportCell};
use edtweetlab_core::features::Category;
use edtweetlab_core::models::ModelKind;

use crate::error::{AppError, Result};

pub const CSV_HEADER: &str = "model,category,f1_pct,accuracy_pct,std_f1,std_acc,wall_clock_s,seed";

/// Marker written in `wall_clock_s` when timings are kept out of the CSV.
pub const NOT_RECORDED: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    if report.cells.is_empty() {
        return Err(AppError::Training("cannot emit an empty report".into()));
    }
    let sorted = report.clone().sorted();
    Ok(match format {
        ReportFormat::Csv => emit_csv(&sorted),
        ReportFormat::Markdown => emit_markdown(&sorted),
    })
}

fn emit_csv(report: &EvalReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in &report.cells {
        let wall = c.wall_clock_s.map_or_else(|| NOT_RECORDED.to_string(), |t| format!("{t:.3}"));
        let _ = writeln!(
            s,
            "{},{},{:.1},{:.1},{:.1},{:.1},{wall},{}",
            c.model,
            c.category.number(),
            c.f1_pct,
            c.accuracy_pct,
            c.std_f1,
            c.std_acc,
            c.seed
        );
    }
    s
}

fn emit_markdown(report: &EvalReport) -> String {
    let models = report.models();
    let cats = report.categories();
    let mut s = String::from("## Classification performance\n\n| Model |");
    for c in &cats {
        let _ = write!(s, " Cat {n} F1 % | Cat {n} Acc % |", n = c.number());
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|---:|".repeat(cats.len()));
    s.push('\n');
    for &m in &models {
        let _ = write!(s, "| {m} |");
        for &c in &cats {
            match report.cell(m, c) {
                Some(cell) => {
                    let _ = write!(s, " {:.1} | {:.1} |", cell.f1_pct, cell.accuracy_pct);
                }
                None => s.push_str(" - | - |"),
            }
        }
        s.push('\n');
    }
    s.push_str("\n## Implementation time (s)\n\n| Model |");
    for c in &cats {
        let _ = write!(s, " Cat {} |", c.number());
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(cats.len()));
    s.push('\n');
    for &m in &models {
        let _ = write!(s, "| {m} |");
        for &c in &cats {
            match report.cell(m, c).and_then(|cell| cell.wall_clock_s) {
                Some(t) => {
                    let _ = write!(s, " {t:.3} |");
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    let _ = write!(s, "\nseed {}, dataset sha256 {}\n", report.meta.seed, report.meta.dataset_hash);
    s
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| AppError::format(path, format!("line {line}: bad {name} {raw:?}")))
}

/// Parses the CSV produced by [`emit_report`]. `path` is only used in messages.
pub fn parse_report(text: &str, path: &Path) -> Result<EvalReport> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(AppError::format(path, "missing report header"));
    }
    let mut report = EvalReport::default();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(AppError::format(path, format!("line {n}: expected 8 columns")));
        }
        let model: ModelKind = field(path, n, "model", cols[0])?;
        let category = Category::new(field(path, n, "category", cols[1])?).map_err(|e| AppError::format(path, format!("line {n}: {e}")))?;
        let wall_clock_s = if cols[6] == NOT_RECORDED { None } else { Some(field(path, n, "wall_clock_s", cols[6])?) };
        report.cells.push(ReportCell {
            model,
            category,
            f1_pct: field(path, n, "f1_pct", cols[2])?,
            accuracy_pct: field(path, n, "accuracy_pct", cols[3])?,
            std_f1: field(path, n, "std_f1", cols[4])?,
            std_acc: field(path, n, "std_acc", cols[5])?,
            wall_clock_s,
            seed: field(path, n, "seed", cols[7])?,
        });
    }
    if let Some(seed) = report.cells.first().map(|c| c.seed) {
        report.meta.seed = seed;
    }
    Ok(report)
}
