//! Machine-readable experiment reports and their plot projections.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{GridScale, Scenario, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The check ran but the resolution cannot separate the claim from the error.
    Inconclusive,
}

/// A named pass/fail check tied to the mathematical claim it exercises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub claim: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Column-labelled numeric table; projected to CSV by [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[&str]) -> Self {
        Series {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Self-contained result of one scenario. Contains no timings, so two runs
/// with the same inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub grid_scale: GridScale,
    pub serial: bool,
    pub inputs: ScenarioConfig,
    pub quantities: BTreeMap<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub series: BTreeMap<String, Series>,
    pub artifacts: Vec<String>,
    pub all_passed: bool,
}

impl ExperimentReport {
    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn quantity(&self, key: &str) -> Option<&Value> {
        self.quantities.get(key)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Per-scenario plot tables as `(file name, CSV text)`, in name order.
pub fn emit_plot_data(report: &ExperimentReport) -> Vec<(String, String)> {
    report
        .series
        .iter()
        .map(|(name, s)| (format!("{name}.csv"), s.to_csv()))
        .collect()
}
