//! Closed-loop trials and their metrics.

use anyhow::Result;
use scbf_mppi_core::barrier::is_safe;
use scbf_mppi_core::dynamics::em_step;
use scbf_mppi_core::mppi::StepDiagnostics;
use scbf_mppi_core::rng::{derive_seed, standard_normal, substream};
use scbf_mppi_core::{ControlVec, Controller, DynamicsModel, StateVec};

use crate::config::{ExperimentConfig, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub mode: Mode,
    pub samples: usize,
    /// Visited closed-loop states, starting with the initial state.
    pub states: Vec<StateVec>,
    /// Executed inputs; one fewer than `states`.
    pub controls: Vec<ControlVec>,
    /// Barrier values `(h1, h2)` per visited state.
    pub barrier_values: Vec<[f64; 2]>,
    pub safe: Vec<bool>,
    pub ttf: Option<usize>,
    pub collisions: usize,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Seed of trial `index` under a master seed. Shared by every benchmark
/// cell so trial `i` of each algorithm sees the same plant noise.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

const PLANT_STREAM: u64 = u64::MAX;

fn reached(config: &ExperimentConfig, x: &StateVec) -> bool {
    let g = config.environment.goal;
    let (dx, dy) = (x[0] - g[0], x[1] - g[1]);
    (dx * dx + dy * dy).sqrt() <= config.environment.vicinity_radius
}

/// Runs the closed loop until the goal vicinity is entered or
/// `max_steps` inputs have been applied. Collisions never abort a trial.
pub fn run_trial(config: &ExperimentConfig, mode: Mode, samples: usize, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(config.controller.seed, trial);
    let model = config.model();
    let barriers = config.barriers();
    let mppi = config.mppi_config(mode, samples, derive_seed(seed, 1))?;
    let mut controller = Controller::new(model, config.cost_spec(), barriers.clone(), mppi)?;
    let mut plant_rng = substream(derive_seed(seed, 2), PLANT_STREAM, 0);
    let dt = config.controller.dt;

    let mut x = config.start_state();
    let mut record = TrialRecord {
        trial,
        mode,
        samples,
        states: vec![x],
        controls: Vec::new(),
        barrier_values: Vec::new(),
        safe: Vec::new(),
        ttf: None,
        collisions: 0,
        diagnostics: Vec::new(),
    };
    for step in 0..=config.environment.max_steps {
        if reached(config, &x) {
            record.ttf = Some(step);
            break;
        }
        if step == config.environment.max_steps {
            break;
        }
        let (u, diag) = controller.control_step(&x)?;
        let noise: StateVec = standard_normal(&mut plant_rng, model.state_dim());
        x = em_step(&model, &x, &u, dt, &noise)?;
        record.controls.push(u);
        record.states.push(x);
        record.diagnostics.push(diag);
    }
    for s in &record.states {
        record.barrier_values.push([barriers[0].value(s), barriers[1].value(s)]);
        let ok = is_safe(s, &barriers);
        record.safe.push(ok);
        record.collisions += usize::from(!ok);
    }
    Ok(record)
}

/// Unsafe visited states over visited states.
pub fn collision_rate(record: &TrialRecord) -> f64 {
    assert!(!record.safe.is_empty(), "trajectory holds at least the initial state");
    record.collisions as f64 / record.safe.len() as f64
}

/// First step whose state lies within the goal vicinity.
pub fn time_to_finish(record: &TrialRecord) -> Option<usize> {
    record.ttf
}
