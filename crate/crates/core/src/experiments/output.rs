use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::FitExpectation;
use crate::error::Result;
use crate::format::sci12;
use crate::measures::{fit_loglog, RateFit};

/// Values at or below this are treated as exact zeros by the rate fits.
pub const ZERO_FLOOR: f64 = 1e-20;

/// Outcome of fitting one report column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted { fit: RateFit },
    /// Every value is (numerically) zero: nothing to fit.
    DegenerateZeros,
    Failed { reason: String },
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&RateFit> {
        match self {
            FitOutcome::Fitted { fit } => Some(fit),
            _ => None,
        }
    }

    /// Checks the fit against optional bounds; `None` when there is no fit.
    pub fn meets(&self, e: &FitExpectation) -> Option<bool> {
        let f = self.fit()?;
        Some(
            e.max_slope.is_none_or(|m| f.slope <= m)
                && e.min_slope.is_none_or(|m| f.slope >= m)
                && e.min_r2.is_none_or(|m| f.r2 >= m),
        )
    }
}

/// Log-log fit of `ys` against `xs`, with the all-zero case made explicit.
pub fn fit_column(xs: &[f64], ys: &[f64]) -> FitOutcome {
    if ys.len() < 3 {
        return FitOutcome::Failed { reason: format!("{} points, a rate fit needs at least 3", ys.len()) };
    }
    if ys.iter().all(|y| y.abs() <= ZERO_FLOOR) {
        return FitOutcome::DegenerateZeros;
    }
    match fit_loglog(xs, ys) {
        Ok(fit) => FitOutcome::Fitted { fit },
        Err(e) => FitOutcome::Failed { reason: e.to_string() },
    }
}

/// Simple CSV table with `%.12e` floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Float(v.unwrap_or(f64::NAN))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => sci12(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Right-aligned plain-text rendering for the terminal.
    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Float(v) => format!("{v:.4e}"),
                        other => other.render(),
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| rendered.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        let line = |cells: &[String], s: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(s, "{}", parts.join("  "));
        };
        line(&self.header, &mut s);
        for r in &rendered {
            line(r, &mut s);
        }
        s
    }
}

/// Everything an experiment writes: CSV tables, extra files and a summary.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    /// Additional files (name, contents), e.g. JSON reports.
    pub files: Vec<(String, String)>,
    pub summary: Value,
    /// Human-readable report for the terminal.
    pub text: String,
}

impl ExperimentOutput {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in &self.tables {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        for (name, contents) in &self.files {
            fs::write(dir.join(name), contents)?;
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)? + "\n")?;
        Ok(())
    }
}
