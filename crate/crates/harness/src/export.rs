//! Per-step CSV and summary JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkRow;
use crate::config::ExperimentConfig;
use crate::samplesize::ModeReport;
use crate::trial::{collision_rate, time_to_finish, TrialRecord};

pub const CSV_HEADER: [&str; 10] = ["trial", "step", "x", "y", "theta", "v", "omega", "h1", "h2", "safe"];

/// One CSV line. `v`/`omega` are the input applied at that state and are
/// empty on the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: usize,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: Option<f64>,
    pub omega: Option<f64>,
    pub h1: f64,
    pub h2: f64,
    pub safe: bool,
}

pub fn csv_rows(record: &TrialRecord) -> impl Iterator<Item = CsvRow> + '_ {
    record.states.iter().enumerate().map(move |(k, s)| {
        let u = record.controls.get(k);
        CsvRow {
            trial: record.trial,
            step: k,
            x: s[0],
            y: s[1],
            theta: s[2],
            v: u.map(|u| u[0]),
            omega: u.map(|u| u[1]),
            h1: record.barrier_values[k][0],
            h2: record.barrier_values[k][1],
            safe: record.safe[k],
        }
    })
}

/// Writes one row per visited state of every record.
pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        for row in csv_rows(r) {
            w.serialize(row).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    anyhow::ensure!(headers.iter().eq(CSV_HEADER), "unexpected CSV header in {}", path.display());
    r.deserialize()
        .map(|row| row.with_context(|| format!("parsing {}", path.display())))
        .collect()
}

/// Collision rate per trial recomputed from CSV rows, in trial order.
pub fn collision_rates_from_rows(rows: &[CsvRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some((t, unsafe_n, n)) if *t == row.trial => {
                *n += 1;
                *unsafe_n += usize::from(!row.safe);
            }
            _ => out.push((row.trial, usize::from(!row.safe), 1)),
        }
    }
    out.into_iter().map(|(t, u, n)| (t, u as f64 / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub algorithm: &'static str,
    pub samples: usize,
    pub trial: usize,
    pub states: usize,
    pub collisions: usize,
    pub collision_rate: f64,
    pub ttf: Option<usize>,
}

impl TrialSummary {
    pub fn of(record: &TrialRecord) -> Self {
        Self {
            algorithm: record.mode.name(),
            samples: record.samples,
            trial: record.trial,
            states: record.states.len(),
            collisions: record.collisions,
            collision_rate: collision_rate(record),
            ttf: time_to_finish(record),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub version: String,
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub table: Vec<BenchmarkRow>,
    pub trials: Vec<TrialSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samplesize: Vec<ModeReport>,
}

pub fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl Summary {
    pub fn new(command: &'static str, config: &ExperimentConfig) -> Self {
        Self {
            version: version_string(),
            command,
            config: config.clone(),
            table: Vec::new(),
            trials: Vec::new(),
            samplesize: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(summary.to_json().as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes `<label>.csv` per group plus `summary.json` into `dir`; returns
/// the paths written.
pub fn export_results(dir: &Path, groups: &[(String, &[TrialRecord])], summary: &Summary) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (label, records) in groups {
        let path = dir.join(format!("{label}.csv"));
        write_csv(records, &path)?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    write_summary(summary, &path)?;
    written.push(path);
    Ok(written)
}
