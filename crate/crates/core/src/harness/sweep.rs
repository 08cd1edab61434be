use serde::{Deserialize, Serialize};

use super::explore::{explore_loop, RunRecord};
use super::jobs::run_jobs;
use super::{ExperimentConfig, Method};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    /// The sweep point.
    pub size: usize,
    /// The ensemble actually trained; always 1 for the adversarial method.
    pub ensemble_size: usize,
    pub seed: u64,
    pub final_coverage: f64,
    pub degenerate: bool,
}

pub struct SweepCondition {
    pub size: usize,
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
}

/// The config run at one (method, size) sweep point.
pub fn sweep_point(base: &ExperimentConfig, method: Method, size: usize) -> ExperimentConfig {
    ExperimentConfig {
        method,
        ensemble_size: if method == Method::Adversarial { 1 } else { size },
        ..base.clone()
    }
}

/// Runs the exploration loop for every (method, size, seed). The
/// adversarial method trains a single model at every sweep point and is
/// re-run at each so that every point sees the same seeds.
pub fn ensemble_size_sweep(base: &ExperimentConfig, jobs: usize) -> Result<(Vec<SweepRow>, Vec<SweepCondition>)> {
    base.validate()?;
    let mut points = Vec::new();
    for &method in &base.sweep.methods {
        for &size in &base.sweep.sizes {
            points.push((size, sweep_point(base, method, size)));
        }
    }
    for (_, c) in &points {
        c.validate()?;
    }
    let work: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| base.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results = run_jobs(jobs, work.clone(), |(p, seed)| explore_loop(&points[p].1, seed).map(|o| o.record));
    let mut rows = Vec::with_capacity(work.len());
    let mut conditions: Vec<SweepCondition> = points
        .into_iter()
        .map(|(size, config)| SweepCondition {
            size,
            config,
            records: Vec::new(),
        })
        .collect();
    for ((p, _), record) in work.into_iter().zip(results) {
        let record = record?;
        let c = &mut conditions[p];
        rows.push(SweepRow {
            method: c.config.method,
            size: c.size,
            ensemble_size: c.config.ensemble_size,
            seed: record.seed,
            final_coverage: record.final_coverage(),
            degenerate: record.degenerate_objective,
        });
        c.records.push(record);
    }
    Ok((rows, conditions))
}
