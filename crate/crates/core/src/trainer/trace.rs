use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::LossBreakdown;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub losses: LossBreakdown,
    /// Direction angles after the step.
    pub directions: Vec<f64>,
}

/// Per-step history of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Values of one term (`d_info`, `g_rec`, `direction_2`, ...) with their steps.
    pub fn series(&self, term: &str) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .flat_map(|r| {
                record_entries(r)
                    .into_iter()
                    .filter(|(name, _)| name == term)
                    .map(move |(_, v)| (r.step, v))
            })
            .collect()
    }

    /// Long-format CSV with header `step,term,value`. Values use the shortest
    /// representation that round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,term,value\n");
        for r in &self.records {
            for (term, value) in record_entries(r) {
                let _ = writeln!(out, "{},{},{}", r.step, term, value);
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn record_entries(r: &TraceRecord) -> Vec<(String, f64)> {
    let mut entries = r.losses.entries();
    entries.extend(
        r.directions
            .iter()
            .enumerate()
            .map(|(i, &d)| (format!("direction_{i}"), d)),
    );
    entries
}
