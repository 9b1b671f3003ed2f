//! Experiment reports: a JSON summary plus optional CSV tables.
//!
//! Reports carry no timestamps or host details, and every map is ordered,
//! so the same config and seed always produce the same bytes.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use geninv_core::Tolerances;
use serde::Serialize;
use serde_json::Value;

/// One acceptance threshold evaluated by a runner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: format!("{name} <= bound"),
            passed: value <= bound,
            value: Some(value),
            bound: Some(bound),
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: format!("{name} >= bound"),
            passed: value >= bound,
            value: Some(value),
            bound: Some(bound),
        }
    }

    pub fn holds(name: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value: None,
            bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub inputs: BTreeMap<String, Value>,
    pub summary: Value,
    pub checks: Vec<Check>,
    /// Names of the CSV tables written next to the summary.
    pub tables: Vec<String>,
    #[serde(skip)]
    pub csv: BTreeMap<String, String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn add_table(&mut self, name: &str, csv: String) {
        self.tables.push(name.to_string());
        self.csv.insert(name.to_string(), csv);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<stem>.json` and one `<stem>.<table>.csv` per table under
    /// `dir`, returning the paths in that order.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<Vec<PathBuf>> {
        let json_path = dir.join(format!("{stem}.json"));
        if let Some(parent) = json_path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&json_path, self.to_json())?;
        let mut paths = vec![json_path];
        for (name, csv) in &self.csv {
            let path = dir.join(format!("{stem}.{name}.csv"));
            std::fs::write(&path, csv)?;
            paths.push(path);
        }
        Ok(paths)
    }
}
