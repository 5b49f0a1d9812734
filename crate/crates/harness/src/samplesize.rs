//! Sample-size report at a fixed step of a closed-loop run.

use anyhow::{bail, Result};
use serde::Serialize;

use scbf_mppi_core::complexity::{complexity_report, estimate_e1, estimate_var_du, scale_costs, EmpiricalStats};
use scbf_mppi_core::dynamics::em_step;
use scbf_mppi_core::rng::{derive_seed, standard_normal, substream};
use scbf_mppi_core::{Controller, DynamicsModel, StateVec};

use crate::config::{ExperimentConfig, Mode};
use crate::trial::trial_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub algorithm: &'static str,
    pub samples: usize,
    pub step: usize,
    pub e1_hat: f64,
    pub var_du: Vec<f64>,
    pub n_used: usize,
    pub n1: u64,
    pub n2: u64,
    pub n: u64,
    pub n2_optimistic: u64,
}

/// Statistics of the controller's batch at control step `step` of trial 0.
pub fn measure(config: &ExperimentConfig, mode: Mode, step: usize) -> Result<EmpiricalStats> {
    let seed = trial_seed(config.controller.seed, 0);
    let model = config.model();
    let mppi = config.mppi_config(mode, config.controller.samples, derive_seed(seed, 1))?;
    let mut controller = Controller::new(model, config.cost_spec(), config.barriers(), mppi)?;
    let mut plant_rng = substream(derive_seed(seed, 2), u64::MAX, 0);
    let mut x = config.start_state();
    for _ in 0..step {
        let (u, _) = controller.control_step(&x)?;
        let noise: StateVec = standard_normal(&mut plant_rng, model.state_dim());
        x = em_step(&model, &x, &u, config.controller.dt, &noise)?;
    }
    controller.control_step(&x)?;
    let Some(batch) = controller.last_batch() else {
        bail!("controller kept no batch");
    };
    let scaled = scale_costs(&batch.costs, config.cost_scaling());
    let e1_hat = estimate_e1(&scaled, config.controller.temperature)?;
    let draws: Vec<_> = batch.perturbations().copied().collect();
    let var_du = estimate_var_du(&draws)?;
    Ok(EmpiricalStats { e1_hat, var_du, n_used: batch.samples() })
}

/// Reports for plain and SCBF sampling at `config.complexity.step`.
pub fn run_samplesize(config: &ExperimentConfig) -> Result<Vec<ModeReport>> {
    let step = config.complexity.step;
    [Mode::Plain, Mode::Scbf]
        .into_iter()
        .map(|mode| {
            let stats = measure(config, mode, step)?;
            let r = complexity_report(config.complexity_inputs(), stats)?;
            Ok(ModeReport {
                algorithm: mode.name(),
                samples: config.controller.samples,
                step,
                e1_hat: stats.e1_hat,
                var_du: stats.var_du.as_slice().to_vec(),
                n_used: stats.n_used,
                n1: r.n1,
                n2: r.n2,
                n: r.n,
                n2_optimistic: r.n2_optimistic,
            })
        })
        .collect()
}
