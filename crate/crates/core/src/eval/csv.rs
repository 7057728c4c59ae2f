//! CSV writers for run metrics and optimization trajectories.
//!
//! Fields are written verbatim: run, split, and metric names are
//! identifier-safe by construction (no commas or quotes), and floats use
//! the shortest round-trip decimal form.

use std::fs;
use std::io;
use std::path::Path;

/// One metric observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub run: String,
    pub seed: u64,
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("run,seed,epoch,split,metric,value\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.run, r.seed, r.epoch, r.split, r.metric, r.value
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> io::Result<()> {
    fs::write(path, metrics_csv(rows))
}

/// One step of a mask-optimization trajectory. A missing AUC (no ground
/// truth) is written as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub epoch: usize,
    pub objective: f64,
    pub cross_entropy: f64,
    pub sparsity: f64,
    pub entropy: f64,
    pub interpretation_auc: Option<f64>,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("epoch,objective,cross_entropy,sparsity,entropy,interpretation_auc\n");
    for r in rows {
        let auc = r.interpretation_auc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.objective, r.cross_entropy, r.sparsity, r.entropy, auc
        ));
    }
    out
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> io::Result<()> {
    fs::write(path, trajectory_csv(rows))
}
