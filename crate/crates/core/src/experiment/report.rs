use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ReportFormat;
use crate::error::{Error, Result};
use crate::metrics::{ConfusionMatrix, MetricBundle};

pub const ADULT_COLUMNS: [&str; 7] = [
    "Model",
    "Training Error",
    "Test Error",
    "QWK",
    "Accuracy",
    "Balanced Acc",
    "Macro F1",
];
pub const PEDIATRIC_COLUMNS: [&str; 5] = ["Model", "QWK", "Accuracy", "Balanced Acc", "Macro F1"];
pub const HEATMAP_COLUMNS: [&str; 5] = ["p_tab", "p_text", "cohort", "metric", "value"];
pub const STRATA_COLUMNS: [&str; 5] = ["Age Group", "N", "Both Intact", "No Tabular", "No Text"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub training_error: Option<f64>,
    pub test_error: Option<f64>,
    pub metrics: MetricBundle,
}

/// Seeds used by one run, recorded for replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub data: u64,
    pub split: u64,
    pub gbdt: u64,
    pub attention: u64,
    pub folds: u64,
    pub meta: u64,
}

/// Meta-classifier retrained under one dropout setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub p_tab: f64,
    pub p_text: f64,
    /// Log-loss on the (unmasked) meta-training set.
    pub training_error: f64,
    pub adult_test_error: f64,
    pub adult: MetricBundle,
    pub pediatric: Option<MetricBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataRow {
    pub bracket: String,
    pub n: usize,
    /// Accuracy under both_intact, no_tabular, no_text; `None` for an empty bracket.
    pub accuracy: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub model: String,
    pub cohort: String,
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: Option<SeedRecord>,
    pub adult: Vec<ModelRow>,
    /// `None` when there is no pediatric cohort to score.
    pub pediatric: Option<Vec<ModelRow>>,
    pub confusion: Vec<ConfusionEntry>,
    pub symmetric: Vec<SweepCell>,
    pub asymmetric: Vec<SweepCell>,
    pub strata: Vec<StrataRow>,
    pub notices: Vec<String>,
}

impl ExperimentReport {
    pub fn is_empty(&self) -> bool {
        self.adult.is_empty()
            && self.pediatric.as_ref().is_none_or(Vec::is_empty)
            && self.symmetric.is_empty()
            && self.asymmetric.is_empty()
            && self.strata.is_empty()
    }
}

/// Display name of a symmetric dropout row, e.g. `40% Dropout`.
pub fn dropout_row_name(p: f64) -> String {
    format!("{}% Dropout", (p * 100.0).round())
}

fn num(v: f64) -> String {
    format!("{v:.3}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn adult_cells(r: &ModelRow) -> Vec<String> {
    let m = &r.metrics;
    vec![
        r.model.clone(),
        opt(r.training_error),
        opt(r.test_error),
        num(m.qwk),
        num(m.accuracy),
        num(m.balanced_accuracy),
        num(m.macro_f1),
    ]
}

fn pediatric_cells(r: &ModelRow) -> Vec<String> {
    let m = &r.metrics;
    vec![
        r.model.clone(),
        num(m.qwk),
        num(m.accuracy),
        num(m.balanced_accuracy),
        num(m.macro_f1),
    ]
}

fn tex_escape(s: &str) -> String {
    s.replace('\\', "\\textbackslash{}")
        .replace('%', "\\%")
        .replace('&', "\\&")
        .replace('_', "\\_")
}

fn tex_line(cells: &[String]) -> String {
    let mut c: Vec<String> = cells.to_vec();
    c[0] = tex_escape(&c[0]);
    format!("{} \\\\", c.join(" & "))
}

/// One adult-table row in the given format (no trailing newline).
pub fn format_adult_row(row: &ModelRow, format: ReportFormat) -> String {
    render_line(&adult_cells(row), format, &adult_widths(std::slice::from_ref(row)))
}

pub fn format_pediatric_row(row: &ModelRow, format: ReportFormat) -> String {
    render_line(&pediatric_cells(row), format, &pediatric_widths(std::slice::from_ref(row)))
}

fn widths(header: &[&str], rows: &[Vec<String>]) -> Vec<usize> {
    header
        .iter()
        .enumerate()
        .map(|(i, h)| rows.iter().map(|r| r[i].len()).chain([h.len()]).max().unwrap_or(0))
        .collect()
}

fn adult_widths(rows: &[ModelRow]) -> Vec<usize> {
    widths(&ADULT_COLUMNS, &rows.iter().map(adult_cells).collect::<Vec<_>>())
}

fn pediatric_widths(rows: &[ModelRow]) -> Vec<usize> {
    widths(&PEDIATRIC_COLUMNS, &rows.iter().map(pediatric_cells).collect::<Vec<_>>())
}

fn csv_line(cells: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(cells).expect("in-memory csv");
    let mut s = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8");
    s.pop();
    s
}

fn render_line(cells: &[String], format: ReportFormat, widths: &[usize]) -> String {
    match format {
        ReportFormat::Csv => csv_line(cells),
        ReportFormat::Tex => tex_line(cells),
        ReportFormat::Txt => {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.trim_end().to_string()
        }
    }
}

fn render_table(title: &str, header: &[&str], rows: &[Vec<String>], format: ReportFormat) -> String {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let mut all = vec![header.clone()];
    all.extend(rows.iter().cloned());
    let w = widths(&header.iter().map(String::as_str).collect::<Vec<_>>(), rows);
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            for r in &all {
                out.push_str(&csv_line(r));
                out.push('\n');
            }
        }
        ReportFormat::Txt => {
            out.push_str(title);
            out.push('\n');
            let head = render_line(&header, format, &w);
            out.push_str(&head);
            out.push('\n');
            out.push_str(&"-".repeat(head.len()));
            out.push('\n');
            for r in rows {
                out.push_str(&render_line(r, format, &w));
                out.push('\n');
            }
        }
        ReportFormat::Tex => {
            let cols = format!("l{}", " r".repeat(header.len() - 1));
            let _ = writeln!(out, "\\begin{{tabular}}{{{cols}}}");
            out.push_str("\\hline\n");
            let _ = writeln!(out, "\\multicolumn{{{}}}{{c}}{{\\textbf{{{}}}}} \\\\", header.len(), tex_escape(title));
            out.push_str("\\hline\n");
            let bold: Vec<String> = header.iter().map(|h| format!("\\textbf{{{h}}}")).collect();
            let _ = writeln!(out, "{} \\\\", bold.join(" & "));
            out.push_str("\\hline\n");
            for r in rows {
                out.push_str(&tex_line(r));
                out.push('\n');
            }
            out.push_str("\\hline\n\\end{tabular}\n");
        }
    }
    out
}

pub fn render_adult_table(rows: &[ModelRow], format: ReportFormat) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(adult_cells).collect();
    render_table("Performances on Adult Cohort", &ADULT_COLUMNS, &cells, format)
}

pub fn render_pediatric_table(rows: &[ModelRow], format: ReportFormat) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(pediatric_cells).collect();
    render_table("Performances on Pediatric Cohort", &PEDIATRIC_COLUMNS, &cells, format)
}

pub fn render_strata_table(rows: &[StrataRow], format: ReportFormat) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![r.bracket.clone(), r.n.to_string()];
            match r.accuracy {
                Some(a) => c.extend(a.iter().map(|v| num(*v))),
                None => c.extend(std::iter::repeat_n(String::new(), 3)),
            }
            c
        })
        .collect();
    render_table("Accuracy by Age Group under Zero-Masking", &STRATA_COLUMNS, &cells, format)
}

/// Long-form `p_tab,p_text,cohort,metric,value` rows: accuracy and QWK per cohort.
pub fn render_long_form(cells: &[SweepCell]) -> String {
    let mut out = csv_line(&HEATMAP_COLUMNS.map(String::from));
    out.push('\n');
    let mut push = |c: &SweepCell, cohort: &str, m: &MetricBundle| {
        for (metric, v) in [("accuracy", m.accuracy), ("qwk", m.qwk)] {
            let _ = writeln!(out, "{},{},{cohort},{metric},{v}", c.p_tab, c.p_text);
        }
    };
    for c in cells {
        push(c, "adult", &c.adult);
        if let Some(p) = &c.pediatric {
            push(c, "pediatric", p);
        }
    }
    out
}

fn render_confusion(entries: &[ConfusionEntry]) -> String {
    let mut out = String::from("model,cohort,true_level,pred_level,count\n");
    for e in entries {
        let k = e.matrix.k();
        for i in 0..k {
            for j in 0..k {
                let _ = writeln!(out, "{},{},{},{},{}", e.model, e.cohort, i + 1, j + 1, e.matrix.get(i, j));
            }
        }
    }
    out
}

/// File name and contents of every report artifact, without touching disk.
pub fn render_report(report: &ExperimentReport, formats: &[ReportFormat]) -> Result<Vec<(String, String)>> {
    if report.is_empty() {
        return Err(Error::InvalidInput("report has no configurations to emit".into()));
    }
    let mut files = Vec::new();
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    for &f in &formats {
        let ext = f.extension();
        if !report.adult.is_empty() {
            files.push((format!("adult.{ext}"), render_adult_table(&report.adult, f)));
        }
        if let Some(p) = report.pediatric.as_ref().filter(|p| !p.is_empty()) {
            files.push((format!("pediatric.{ext}"), render_pediatric_table(p, f)));
        }
        if !report.strata.is_empty() {
            files.push((format!("strata.{ext}"), render_strata_table(&report.strata, f)));
        }
    }
    if !report.symmetric.is_empty() {
        files.push(("sweep_symmetric.csv".into(), render_long_form(&report.symmetric)));
    }
    if !report.asymmetric.is_empty() {
        files.push(("heatmap.csv".into(), render_long_form(&report.asymmetric)));
    }
    if !report.confusion.is_empty() {
        files.push(("confusion.csv".into(), render_confusion(&report.confusion)));
    }
    if !report.notices.is_empty() {
        files.push(("notices.txt".into(), report.notices.join("\n") + "\n"));
    }
    files.push(("report.json".into(), serde_json::to_string_pretty(report)? + "\n"));
    Ok(files)
}

/// Writes every report file into `dir`. All contents are rendered first and
/// each file goes through a temporary name, so a failure leaves no partial
/// report behind.
pub fn emit_report(report: &ExperimentReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    let files = render_report(report, formats)?;
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, contents) in &files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = std::fs::write(&tmp, contents) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            return Err(e.into());
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        std::fs::rename(&tmp, &dest)?;
        written.push(dest);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, v: [f64; 6]) -> ModelRow {
        ModelRow {
            model: name.into(),
            training_error: Some(v[0]),
            test_error: Some(v[1]),
            metrics: MetricBundle {
                qwk: v[2],
                accuracy: v[3],
                balanced_accuracy: v[4],
                macro_f1: v[5],
                mean_log_loss: None,
                mse: None,
            },
        }
    }

    #[test]
    fn tex_row_layout() {
        let r = row("40% Dropout", [0.726, 0.73, 0.636, 0.696, 0.474, 0.497]);
        assert_eq!(
            format_adult_row(&r, ReportFormat::Tex),
            "40\\% Dropout & 0.726 & 0.730 & 0.636 & 0.696 & 0.474 & 0.497 \\\\"
        );
        assert_eq!(
            format_pediatric_row(&r, ReportFormat::Csv),
            "40% Dropout,0.636,0.696,0.474,0.497"
        );
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(emit_report(&ExperimentReport::default(), &out, &[ReportFormat::Csv]).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn dropout_names() {
        assert_eq!(dropout_row_name(0.1), "10% Dropout");
        assert_eq!(dropout_row_name(0.6), "60% Dropout");
    }
}
