//! Collision-rate / time-to-finish tables over a grid of algorithms and
//! sample counts.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::trial::{collision_rate, run_trial, time_to_finish, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub mode: Mode,
    pub samples: usize,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}_{}", self.mode.name(), self.samples)
    }
}

/// Parses `plain:200,scbf:500,...`.
pub fn parse_grid(spec: &str) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (mode, k) = item.split_once(':').with_context(|| format!("grid entry `{item}` is not algorithm:K"))?;
        let samples: usize = k.parse().with_context(|| format!("bad sample count in `{item}`"))?;
        if samples == 0 {
            bail!("sample count must be positive in `{item}`");
        }
        cells.push(Cell { mode: Mode::parse(mode)?, samples });
    }
    if cells.is_empty() {
        bail!("empty grid");
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub algorithm: &'static str,
    pub samples: usize,
    pub trials: usize,
    pub mean_collision_rate: f64,
    pub total_collisions: usize,
    /// Mean over finishing trials only.
    pub mean_ttf: Option<f64>,
    pub finished: usize,
    pub did_not_finish: usize,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub rows: Vec<BenchmarkRow>,
    /// Per cell, in grid order.
    pub records: Vec<(Cell, Vec<TrialRecord>)>,
}

pub fn summarize(cell: Cell, records: &[TrialRecord]) -> BenchmarkRow {
    let n = records.len();
    let ttfs: Vec<usize> = records.iter().filter_map(time_to_finish).collect();
    BenchmarkRow {
        algorithm: cell.mode.name(),
        samples: cell.samples,
        trials: n,
        mean_collision_rate: records.iter().map(collision_rate).sum::<f64>() / n as f64,
        total_collisions: records.iter().map(|r| r.collisions).sum(),
        mean_ttf: (!ttfs.is_empty()).then(|| ttfs.iter().sum::<usize>() as f64 / ttfs.len() as f64),
        finished: ttfs.len(),
        did_not_finish: n - ttfs.len(),
    }
}

/// Runs `trials` closed-loop trials per cell. Trial `i` uses the same
/// derived seed in every cell.
pub fn run_benchmark(config: &ExperimentConfig, cells: &[Cell], trials: usize) -> Result<Benchmark> {
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let results: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(config, cells[c].mode, cells[c].samples, t))
        .collect();
    let mut per_cell: Vec<Vec<TrialRecord>> = vec![Vec::with_capacity(trials); cells.len()];
    for ((c, _), r) in jobs.iter().zip(results) {
        per_cell[*c].push(r?);
    }
    let rows = cells.iter().zip(&per_cell).map(|(cell, recs)| summarize(*cell, recs)).collect();
    Ok(Benchmark { rows, records: cells.iter().copied().zip(per_cell).collect() })
}
