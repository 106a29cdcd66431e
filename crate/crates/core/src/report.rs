//! Report tables and their Markdown, CSV and JSON emitters.
//!
//! Values stay unformatted until emission: returns are decimals inside a
//! [`Cell::Percent`] and become two-decimal percents only in Markdown.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Bumped whenever the JSON layout or CSV column rules change.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Empty,
    Text { text: String },
    /// A decimal return shown as a percent.
    Percent { value: f64, stars: &'static str },
    Number { value: f64, decimals: u8, stars: &'static str },
    /// Shown in brackets under its coefficient.
    TStat { value: f64 },
    Count { value: u64 },
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text { text: s.into() }
    }

    pub fn pct(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, |value| Cell::Percent { value, stars: "" })
    }

    pub fn pct_stars(v: Option<f64>, stars: &'static str) -> Self {
        v.map_or(Cell::Empty, |value| Cell::Percent { value, stars })
    }

    pub fn num(v: Option<f64>, decimals: u8) -> Self {
        v.map_or(Cell::Empty, |value| Cell::Number {
            value,
            decimals,
            stars: "",
        })
    }

    pub fn num_stars(v: Option<f64>, decimals: u8, stars: &'static str) -> Self {
        v.map_or(Cell::Empty, |value| Cell::Number {
            value,
            decimals,
            stars,
        })
    }

    pub fn t(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, |value| Cell::TStat { value })
    }

    pub fn count(n: usize) -> Self {
        Cell::Count { value: n as u64 }
    }

    /// Typeset form used in Markdown.
    pub fn display(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Text { text } => text.clone(),
            Cell::Percent { value, stars } => format!("{:.2}{stars}", value * 100.0),
            Cell::Number {
                value,
                decimals,
                stars,
            } => format!("{:.*}{stars}", *decimals as usize, value),
            Cell::TStat { value } => format!("[{value:.2}]"),
            Cell::Count { value } => value.to_string(),
        }
    }

    /// Plain machine-readable form used in CSV: percents in percent units at
    /// full precision, no brackets or stars.
    pub fn raw(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Text { text } => text.clone(),
            Cell::Percent { value, .. } => (value * 100.0).to_string(),
            Cell::Number { value, .. } | Cell::TStat { value } => value.to_string(),
            Cell::Count { value } => value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    /// File-name-safe identifier, unique within a report.
    pub id: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(id: impl Into<String>, title: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len(), "row width in {}", self.id);
        self.rows.push(Row {
            label: label.into(),
            cells,
        });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "### {}\n", self.title);
        let header: Vec<&str> = std::iter::once("").chain(self.columns.iter().map(String::as_str)).collect();
        let _ = writeln!(s, "| {} |", header.join(" | "));
        let _ = writeln!(s, "|{}", ":---|".to_owned() + &"---:|".repeat(self.columns.len()));
        for r in &self.rows {
            let cells: Vec<String> = r.cells.iter().map(Cell::display).collect();
            let _ = writeln!(s, "| {} | {} |", r.label, cells.join(" | "));
        }
        for n in &self.notes {
            let _ = writeln!(s, "\n_{n}_");
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e| Error::csv(format!("{}.csv", self.id), e);
        w.write_record(std::iter::once("label").chain(self.columns.iter().map(String::as_str)))
            .map_err(err)?;
        for r in &self.rows {
            w.write_record(std::iter::once(r.label.clone()).chain(r.cells.iter().map(Cell::raw)))
                .map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Invalid(format!("{}.csv: {e}", self.id)))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Md,
    Csv,
    Json,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Md, Format::Csv, Format::Json];
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (md, csv, json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub engine_version: String,
    pub config_hash: String,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_owned(),
            engine_version: crate::VERSION.to_owned(),
            config_hash: config_hash.to_owned(),
            tables: Vec::new(),
        }
    }

    pub fn push(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn table(&self, id: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.id == id)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "# {}\n\nengine {} · config {} · schema v{}\n",
            self.command, self.engine_version, self.config_hash, self.schema_version
        );
        for t in &self.tables {
            s.push('\n');
            s.push_str(&t.to_markdown());
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("report serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<command>.md`, `<command>.json` and one
    /// `<command>_<table>.csv` per table, as selected. Returns the paths.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        for f in formats {
            match f {
                Format::Md => put(format!("{}.md", self.command), self.to_markdown())?,
                Format::Json => put(format!("{}.json", self.command), self.to_json()?)?,
                Format::Csv => {
                    for t in &self.tables {
                        put(format!("{}_{}.csv", self.command, t.id), t.to_csv()?)?;
                    }
                }
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typography() {
        assert_eq!(Cell::pct_stars(Some(0.0106), "***").display(), "1.06***");
        assert_eq!(Cell::t(Some(4.567)).display(), "[4.57]");
        assert_eq!(Cell::num(Some(0.5349), 2).display(), "0.53");
        assert_eq!(Cell::pct(None).display(), "");
        assert_eq!(Cell::pct(Some(-0.0005)).display(), "-0.05");
        assert_eq!(Cell::pct(Some(0.0125)).raw(), (0.0125f64 * 100.0).to_string());
    }

    #[test]
    fn markdown_and_csv_layout() {
        let mut t = Table::new("x", "Example", vec!["D1".into(), "L/S".into()]);
        t.push("mean", vec![Cell::pct(Some(0.01)), Cell::pct_stars(Some(0.02), "**")]);
        t.push("", vec![Cell::t(Some(1.0)), Cell::t(Some(2.5))]);
        let md = t.to_markdown();
        assert!(md.contains("| mean | 1.00 | 2.00** |"));
        assert!(md.contains("|  | [1.00] | [2.50] |"));
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), "label,D1,L/S");
        assert_eq!(csv.lines().nth(2).unwrap(), ",1,2.5");
    }
}
