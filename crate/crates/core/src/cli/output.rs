//! Deterministic CSV and JSON writers.

use std::path::Path;

use serde::Serialize;

use crate::diagnostics::ParameterSummary;
use crate::{Error, Result};

/// Formats `v` with 17 significant digits, enough to parse back the same
/// value. Non-finite values print as `NaN`, `inf` and `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// An in-memory table written with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub(crate) const SUMMARY_COLUMNS: [&str; 8] =
    ["mean", "sd", "ci95_lower", "ci95_upper", "ci80_lower", "ci80_upper", "ess", "rhat"];

/// Mean, sd, both intervals, ESS and R-hat of a summary, formatted.
pub(crate) fn summary_fields(s: &ParameterSummary) -> Vec<String> {
    [s.mean, s.sd, s.ci95.0, s.ci95.1, s.ci80.0, s.ci80.1, s.ess, s.rhat]
        .into_iter()
        .map(format_float)
        .collect()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::from)
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", path.display())))
}
