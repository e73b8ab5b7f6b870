use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::error::Result;
use crate::fit::SlopeFit;

/// One pass/fail threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable threshold, e.g. `in [0.7, 1.3]`.
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: threshold.into(),
            passed,
        }
    }

    pub fn window(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi)
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::new(name, value, format!(">= {lo}"), value >= lo)
    }

    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self::new(name, value, format!("<= {hi}"), value <= hi)
    }
}

/// CSV table, one row per grid cell of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    /// Column `name` parsed as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub config: StudyConfig,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl StudyReport {
    pub fn new(config: &StudyConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("rbmlab-core".to_string(), rbmlab_core::VERSION.to_string());
        versions.insert("rbmlab".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            study: config.study.clone(),
            config: config.clone(),
            config_hash: config.hash(),
            versions,
            fits: BTreeMap::new(),
            values: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<study>_<table>.csv` for every table and `<study>_summary.json`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.study, t.name));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
            written.push(path);
        }
        let path = dir.join(format!("{}_summary.json", self.study));
        let mut value = serde_json::to_value(self)?;
        value["passed"] = serde_json::Value::Bool(self.passed());
        std::fs::write(&path, serde_json::to_string_pretty(&value)?)?;
        written.push(path);
        Ok(written)
    }
}
