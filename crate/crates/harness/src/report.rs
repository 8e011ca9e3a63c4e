//! Reports: per-seed records, aggregates recomputable from them, named checks and tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub metrics: Value,
}

/// Plot-ready table; written row-major with `#` comment headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub comments: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), comments: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(mut self, key: &str, value: impl ToString) -> Self {
        self.comments.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Numeric grid with `None` cells (walls) stored as null and written as `nan`.
    pub fn grid(name: &str, values: &[Vec<Option<f64>>]) -> Self {
        let width = values.first().map_or(0, |r| r.len());
        let columns: Vec<String> = (0..width).map(|c| format!("c{c}")).collect();
        let rows = values.iter().map(|r| r.iter().map(|v| v.map_or(Value::Null, num)).collect()).collect();
        Self { name: name.into(), comments: Vec::new(), columns, rows }
    }

    pub fn to_csv(&self, preamble: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in preamble.iter().chain(&self.comments) {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str(&format!("# columns={}\n", self.columns.join(",")));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => "nan".into(),
        Value::Bool(b) => (*b as u8).to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
    pub records: Vec<SeedRecord>,
    pub aggregate: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Wall-clock seconds since the epoch; the only field that varies between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("predrep-harness".into(), env!("CARGO_PKG_VERSION").into());
        Self {
            experiment: config.experiment.clone(),
            config: config.clone(),
            versions,
            records: Vec::new(),
            aggregate: Value::Null,
            checks: Vec::new(),
            tables: Vec::new(),
            timestamp: None,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn stamp(&mut self) {
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.timestamp = Some(now);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the timestamp removed; identical for identical `(config, seeds)`.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timestamp = None;
        copy.to_json()
    }

    /// Writes `report.json`, or one CSV per table. Returns the written paths.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            Format::Json => {
                let path = dir.join("report.json");
                std::fs::File::create(&path)?.write_all(self.to_json()?.as_bytes())?;
                written.push(path);
            }
            Format::Csv => {
                let seeds: Vec<String> = self.config.seeds.iter().map(|s| s.to_string()).collect();
                let preamble = vec![("experiment".to_string(), self.experiment.clone()), ("seeds".to_string(), seeds.join(" "))];
                for t in &self.tables {
                    let path = dir.join(format!("{}.csv", t.name));
                    std::fs::write(&path, t.to_csv(&preamble))?;
                    written.push(path);
                }
                let path = dir.join("checks.csv");
                let mut checks = Table::new("checks", &["name", "passed", "detail"]);
                for c in &self.checks {
                    checks.push(vec![c.name.clone().into(), c.passed.into(), c.detail.clone().into()]);
                }
                std::fs::write(&path, checks.to_csv(&preamble))?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
