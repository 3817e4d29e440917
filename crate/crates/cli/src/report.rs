use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const FORMAT: &str = "xnt-report";
pub const FORMAT_VERSION: u32 = 1;

/// Versioned report envelope. Everything except `timings_ms` is a pure
/// function of the effective configuration and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Effective flag values after the config-file overlay.
    pub config: BTreeMap<String, Value>,
    pub result: Value,
    /// Verdicts only established up to a finite extension degree.
    pub semi_decisions: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, Value>) -> Self {
        Report {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            result: Value::Null,
            semi_decisions: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite JSON") + "\n"
    }

    pub fn read(path: &Path) -> std::io::Result<Report> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// A flat table written as one CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: ToString>(name: &str, header: impl IntoIterator<Item = S>) -> Self {
        Table {
            name: name.into(),
            header: header.into_iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len(), "table {}", self.name);
        self.rows.push(row);
    }
}

/// Writes `<dir>/<command>-<table>.csv` for every table; returns the paths.
pub fn write_tables(dir: &Path, command: &str, tables: &[Table]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for t in tables {
        let path = dir.join(format!("{command}-{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_json(report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let text = report.to_json();
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)
        }
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}
