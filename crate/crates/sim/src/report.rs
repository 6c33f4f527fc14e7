//! Run artifacts: CSV tables and the structured-text summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::scenario::Scenario;

/// Version of the summary layout; bumped whenever a key changes meaning.
pub const SUMMARY_SCHEMA: &str = "dlambda-sim.summary/1";

/// A numeric table written as CSV. Column names carry their units.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    /// `None` cells are written empty.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Table {
            file: file.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(Some).collect());
        debug_assert_eq!(self.rows.last().map(Vec::len), Some(self.header.len()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(format_number).unwrap_or_default()))
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Shortest round-trip decimal form; identical for identical bits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Headline numbers, keys with units.
    pub results: toml::Table,
    /// Reasons the run should be treated as failed.
    pub flags: Vec<String>,
}

impl Outcome {
    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        match self.results.get(key)? {
            toml::Value::Float(x) => Some(*x),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn flag(&mut self, reason: impl Into<String>) {
        self.flags.push(reason.into());
    }

    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }
}

/// Summary document: schema, status, results and the resolved scenario.
pub fn summary(scenario: &Scenario, outcome: Result<&Outcome, &str>) -> String {
    let mut doc = toml::Table::new();
    doc.insert("schema".into(), SUMMARY_SCHEMA.into());
    doc.insert(
        "generator".into(),
        concat!("dlambda-sim ", env!("CARGO_PKG_VERSION")).into(),
    );
    doc.insert("experiment".into(), scenario.experiment.name().into());
    match outcome {
        Ok(o) => {
            doc.insert(
                "status".into(),
                if o.is_flagged() { "flagged" } else { "ok" }.into(),
            );
            doc.insert(
                "flags".into(),
                toml::Value::Array(o.flags.iter().map(|f| f.as_str().into()).collect()),
            );
            doc.insert(
                "outputs".into(),
                toml::Value::Array(o.tables.iter().map(|t| t.file.as_str().into()).collect()),
            );
            doc.insert("results".into(), toml::Value::Table(o.results.clone()));
        }
        Err(message) => {
            doc.insert("status".into(), "failed".into());
            doc.insert("flags".into(), toml::Value::Array(vec![message.into()]));
            doc.insert("outputs".into(), toml::Value::Array(Vec::new()));
            doc.insert("results".into(), toml::Value::Table(toml::Table::new()));
        }
    }
    doc.insert("config".into(), toml::Value::Table(scenario.to_toml()));
    toml::to_string(&doc).expect("summary serialises")
}

pub const SUMMARY_FILE: &str = "summary.toml";

/// Writes the tables and `summary.toml` into `dir`, returning the paths
/// written.
pub fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    outcome: Result<&Outcome, &str>,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Ok(o) = outcome {
        for t in &o.tables {
            let p = dir.join(&t.file);
            fs::write(&p, t.to_csv())?;
            written.push(p);
        }
    }
    let p = dir.join(SUMMARY_FILE);
    fs::write(&p, summary(scenario, outcome))?;
    written.push(p);
    Ok(written)
}
