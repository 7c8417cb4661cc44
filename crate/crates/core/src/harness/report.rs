//! Result tables as CSV or markdown.
//!
//! Columns are fixed: `model, input_selection, technique, precision, recall,
//! f1, runtime_s`. Scores are rendered with four decimals; `runtime_s` is
//! empty for rows without a measured runtime.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ExperimentRow;
use crate::pipeline::InputSelection;

pub const COLUMNS: [&str; 7] = [
    "model",
    "input_selection",
    "technique",
    "precision",
    "recall",
    "f1",
    "runtime_s",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to report")]
    Empty,
    #[error("report header {found:?} does not match {COLUMNS:?}")]
    BadHeader { found: Vec<String> },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// One rendered table line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub input_selection: InputSelection,
    pub technique: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub runtime_s: Option<f64>,
}

impl From<&ExperimentRow> for ReportRow {
    fn from(row: &ExperimentRow) -> Self {
        Self {
            model: row.model.clone(),
            input_selection: row.input_selection,
            technique: row.technique.number(),
            precision: row.metrics.precision,
            recall: row.metrics.recall,
            f1: row.metrics.f1,
            runtime_s: Some(row.runtime_s),
        }
    }
}

fn fixed4(x: f64) -> String {
    format!("{x:.4}")
}

impl ReportRow {
    fn cells(&self) -> [String; 7] {
        [
            self.model.clone(),
            self.input_selection.to_string(),
            self.technique.to_string(),
            fixed4(self.precision),
            fixed4(self.recall),
            fixed4(self.f1),
            self.runtime_s.map(fixed4).unwrap_or_default(),
        ]
    }

    /// `precision,recall,f1` as rendered in the CSV.
    pub fn scores_csv(&self) -> String {
        let c = self.cells();
        c[3..6].join(",")
    }
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for row in rows {
                w.write_record(row.cells())?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            let header: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
            let rule: Vec<String> = COLUMNS.iter().map(|c| "-".repeat(c.len().max(3))).collect();
            let mut out = line(&header) + &line(&rule);
            for row in rows {
                out += &line(&row.cells().map(|c| c.replace('|', "\\|")));
            }
            Ok(out)
        }
    }
}

pub fn write_report(
    rows: &[ReportRow],
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    std::fs::write(path, emit_report(rows, format)?)?;
    Ok(())
}

/// Parses a CSV report back into rows.
pub fn parse_report(reader: impl Read) -> Result<Vec<ReportRow>, ReportError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(ReportError::BadHeader { found: header });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let bad = |reason: String| ReportError::BadRow { row: i + 1, reason };
        let num = |k: usize| -> Result<f64, ReportError> {
            record[k]
                .parse()
                .map_err(|e| bad(format!("{}: {e}", COLUMNS[k])))
        };
        rows.push(ReportRow {
            model: record[0].to_string(),
            input_selection: record[1].parse().map_err(bad)?,
            technique: record[2]
                .parse()
                .ok()
                .filter(|t| (1..=3).contains(t))
                .ok_or_else(|| bad(format!("technique {:?}", &record[2])))?,
            precision: num(3)?,
            recall: num(4)?,
            f1: num(5)?,
            runtime_s: if record[6].is_empty() { None } else { Some(num(6)?) },
        });
    }
    Ok(rows)
}

/// Published reference rows shipped with the crate, for display and
/// format checks only.
pub fn reference_rows() -> Vec<ReportRow> {
    parse_report(REFERENCE_CSV.as_bytes()).expect("bundled reference table parses")
}

pub const REFERENCE_CSV: &str = include_str!("../../fixtures/reference_tables.csv");
