//! Run reports: nested JSON, long-format CSV and confusion grids.

use std::fs;
use std::path::Path;

use authcil_core::eval::OriginAccuracy;
use authcil_core::{
    average_accuracy, average_accuracy_incremental, performance_drop, ConfusionMatrix, SessionEval,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics emitted per session in the CSV export.
pub const CSV_METRICS: [&str; 3] = ["accuracy", "pd_so_far", "avg_a_so_far"];
pub const CSV_HEADER: &str = "strategy,seed,session,metric,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub t: usize,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_origin: Vec<OriginAccuracy>,
}

impl From<&SessionEval> for SessionRow {
    fn from(e: &SessionEval) -> Self {
        Self {
            t: e.session,
            accuracy: e.accuracy,
            correct: e.correct,
            total: e.total,
            per_origin: e.per_origin.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub seed: u64,
    pub config_hash: String,
    pub sessions: Vec<SessionRow>,
    /// Absent for single-session runs.
    pub pd: Option<f64>,
    pub avg_a: Option<f64>,
    /// Mean over sessions 1.. only.
    pub avg_a_incremental: Option<f64>,
}

impl RunReport {
    pub fn new(strategy: impl Into<String>, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            strategy: strategy.into(),
            seed,
            config_hash: config_hash.into(),
            sessions: Vec::new(),
            pd: None,
            avg_a: None,
            avg_a_incremental: None,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.sessions.iter().map(|s| s.accuracy).collect()
    }

    pub fn push(&mut self, row: SessionRow) {
        self.sessions.push(row);
        self.refresh();
    }

    /// Recomputes the summary metrics from the rows.
    pub fn refresh(&mut self) {
        let acc = self.accuracies();
        self.pd = performance_drop(&acc).ok();
        self.avg_a = average_accuracy(&acc).ok();
        self.avg_a_incremental = average_accuracy_incremental(&acc).ok();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// One row per (session, metric), values to two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let acc = self.accuracies();
        for (i, row) in self.sessions.iter().enumerate() {
            let prefix = &acc[..=i];
            let values = [
                row.accuracy,
                prefix[0] - prefix[i],
                prefix.iter().sum::<f64>() / prefix.len() as f64,
            ];
            for (metric, value) in CSV_METRICS.iter().zip(values) {
                out.push_str(&format!(
                    "{},{},{},{metric},{value:.2}\n",
                    csv_field(&self.strategy),
                    self.seed,
                    row.t
                ));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Square grid with true classes as rows, labelled by author.
pub fn confusion_csv(confusion: &ConfusionMatrix, authors: &[String]) -> String {
    let label = |i: usize| {
        authors
            .get(i)
            .map(|a| csv_field(a))
            .unwrap_or_else(|| i.to_string())
    };
    let mut out = String::from("true\\predicted");
    for j in 0..confusion.classes {
        out.push(',');
        out.push_str(&label(j));
    }
    out.push('\n');
    for i in 0..confusion.classes {
        out.push_str(&label(i));
        for c in confusion.row(i) {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}
