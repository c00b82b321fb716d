//! Cross-validation reports: a JSON record and a plain-text confusion table.
//!
//! Neither output contains timestamps, paths or thread counts, so identical
//! runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{write_file, IoError, SCHEMA_VERSION};
use crate::evaluate::{ClassifierConfig, ConfusionMatrix, EvalReport, PredictionRecord};
use crate::labels::EmotionLabel;
use crate::motion::DescriptorConfig;

/// Context recorded alongside the results.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportMeta {
    pub descriptor: Option<DescriptorConfig>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    kind: &'static str,
    config: &'a ClassifierConfig,
    descriptor: Option<&'a DescriptorConfig>,
    labels: &'a [EmotionLabel],
    average_accuracy: f64,
    per_class_accuracy: Vec<ClassAccuracy<'a>>,
    counts: &'a [Vec<u64>],
    rates: Vec<Option<Vec<f64>>>,
    folds: Vec<FoldJson<'a>>,
}

#[derive(Serialize)]
struct ClassAccuracy<'a> {
    label: &'a EmotionLabel,
    n_test: u64,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct FoldJson<'a> {
    held_out_subject: &'a str,
    n_test: u64,
    average_accuracy: Option<f64>,
    missing_labels: &'a [EmotionLabel],
    counts: &'a [Vec<u64>],
    predictions: &'a [PredictionRecord],
}

/// Pretty-printed JSON, newline-terminated.
pub fn report_json(report: &EvalReport, meta: &ReportMeta) -> String {
    let overall = &report.overall;
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        kind: "crossval_report",
        config: &report.config,
        descriptor: meta.descriptor.as_ref(),
        labels: overall.labels(),
        average_accuracy: report.average_accuracy,
        per_class_accuracy: report
            .per_class_accuracy
            .iter()
            .enumerate()
            .map(|(i, (label, accuracy))| ClassAccuracy {
                label,
                n_test: overall.row_total(i),
                accuracy: *accuracy,
            })
            .collect(),
        counts: overall.counts(),
        rates: overall.rates(),
        folds: report
            .folds
            .iter()
            .map(|f| FoldJson {
                held_out_subject: &f.held_out_subject,
                n_test: f.confusion.total(),
                average_accuracy: f.confusion.average_accuracy(),
                missing_labels: &f.missing_labels,
                counts: f.confusion.counts(),
                predictions: &f.predictions,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

/// Row-normalized confusion table in percent, rows true and columns
/// predicted, followed by the macro-averaged accuracy.
pub fn render_confusion(m: &ConfusionMatrix) -> String {
    let titles: Vec<String> = m.labels().iter().map(EmotionLabel::title).collect();
    let head = titles.iter().map(String::len).max().unwrap_or(0);
    let width = head.max(6) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:head$}", "");
    for t in &titles {
        let _ = write!(out, "{t:>width$}");
    }
    out.push('\n');
    for (i, t) in titles.iter().enumerate() {
        let _ = write!(out, "{t:head$}");
        match m.row_rates(i) {
            Some(rates) => {
                for r in rates {
                    let _ = write!(out, "{:>width$.2}", 100.0 * r);
                }
            }
            None => {
                for _ in &titles {
                    let _ = write!(out, "{:>width$}", "n/a");
                }
            }
        }
        out.push('\n');
    }
    match m.average_accuracy() {
        Some(a) => {
            let _ = writeln!(out, "Average accuracy: {:.2}%", 100.0 * a);
        }
        None => out.push_str("Average accuracy: n/a\n"),
    }
    out
}

/// Configuration line, confusion table, and a note per fold whose training
/// data lacked a tested label.
pub fn render_table(report: &EvalReport) -> String {
    let c = &report.config;
    let mut out = match c.mode {
        crate::evaluate::Mode::Knn => format!("Mode: knn (k = {}), metric: {}\n", c.k, c.metric),
        crate::evaluate::Mode::Prototype => format!("Mode: prototype, metric: {}\n", c.metric),
    };
    let _ = writeln!(
        out,
        "Leave-one-subject-out: {} folds, {} test sequences\n",
        report.folds.len(),
        report.overall.total()
    );
    out.push_str(&render_confusion(&report.overall));
    for f in report.flagged_folds() {
        let missing: Vec<&str> = f.missing_labels.iter().map(EmotionLabel::as_str).collect();
        let _ = writeln!(
            out,
            "Note: fold {} had no training samples of {}",
            f.held_out_subject,
            missing.join(", ")
        );
    }
    out
}

/// Writes `report_json` to `path`.
pub fn save_report(report: &EvalReport, meta: &ReportMeta, path: &Path) -> Result<(), IoError> {
    let text = report_json(report, meta);
    write_file(path, |w| std::io::Write::write_all(w, text.as_bytes()))
}
