//! Sampling-based MPPI control loop with optional per-sample distribution
//! shaping.

use alloc::vec::Vec;
use rand::Rng;

use crate::barrier::{constraint_coeffs, is_safe, BarrierFunction, ConstraintCoeffs, SafetyParams};
use crate::complexity::estimate_var_du;
use crate::cost::{trajectory_cost, CostSpec};
use crate::dynamics::{em_step, DynamicsModel, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{ControlVec, StateVec};
use crate::rng::{standard_normal, substream};
use crate::shaper::{
    constraint_slack, min_norm_mean, shape, GaussianDist, ShaperProblem, ShaperStatus, DEFAULT_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    Plain,
    Scbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MppiConfig {
    /// `K`
    pub samples: usize,
    /// `T`
    pub horizon: usize,
    pub dt: f64,
    /// `λ`
    pub temperature: f64,
    /// Per-dimension standard deviations of the nominal perturbation.
    pub nominal_sigma: ControlVec,
    pub mode: SamplingMode,
    pub seed: u64,
    pub safety: SafetyParams,
    pub shaper_tolerance: f64,
    /// Shape once per timestep at the unperturbed nominal state instead of
    /// once per sample at the sample's own state.
    pub shared_shaping: bool,
    /// Add `λ·log(q/p)` to each cost to correct for sampling from the
    /// shaped distribution `q` instead of the nominal `p`.
    pub likelihood_ratio: bool,
    /// Appended at the end of the horizon after each shift.
    pub u_init: ControlVec,
}

impl MppiConfig {
    pub fn new(control_dim: usize) -> Self {
        Self {
            samples: 200,
            horizon: 20,
            dt: 0.05,
            temperature: 1.0,
            nominal_sigma: ControlVec::from_fn(control_dim, |_| 1.0),
            mode: SamplingMode::Plain,
            seed: 0,
            safety: SafetyParams::default(),
            shaper_tolerance: DEFAULT_TOLERANCE,
            shared_shaping: false,
            likelihood_ratio: false,
            u_init: ControlVec::zeros(control_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.samples == 0 {
            return Err(Error::InvalidParameter { name: "samples", reason: "must be at least 1" });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter { name: "horizon", reason: "must be at least 1" });
        }
        if !positive(self.dt) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive" });
        }
        if !positive(self.temperature) {
            return Err(Error::InvalidParameter { name: "temperature", reason: "must be positive" });
        }
        if !positive(self.shaper_tolerance) {
            return Err(Error::InvalidParameter { name: "shaper_tolerance", reason: "must be positive" });
        }
        if self.nominal_sigma.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter { name: "nominal_sigma", reason: "must be finite and nonnegative" });
        }
        check_dim("u_init", self.nominal_sigma.len(), self.u_init.len())?;
        if !self.u_init.is_finite() {
            return Err(Error::NonFinite("u_init"));
        }
        self.safety.validate()
    }

    pub fn nominal(&self) -> GaussianDist {
        GaussianDist::diagonal(ControlVec::zeros(self.nominal_sigma.len()), &self.nominal_sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub inputs: Vec<ControlVec>,
}

impl ControlSchedule {
    pub fn constant(horizon: usize, u: ControlVec) -> Self {
        Self { inputs: alloc::vec![u; horizon] }
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn first(&self) -> ControlVec {
        self.inputs[0]
    }
}

/// What the sampler did with the nominal distribution at one `(i, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleShaping {
    Nominal,
    Shaped,
    /// Shaping was infeasible; a zero-covariance minimal-norm mean was used.
    Fallback,
    /// Shaping was infeasible and no fallback existed; the nominal was used.
    Flagged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub trajectories: Vec<Trajectory>,
    pub costs: Vec<f64>,
    /// Row-major `K × T`.
    pub shaping: Vec<SampleShaping>,
    pub horizon: usize,
}

impl RolloutBatch {
    pub fn samples(&self) -> usize {
        self.costs.len()
    }

    pub fn shaped_flag(&self, sample: usize, t: usize) -> bool {
        self.shaping[sample * self.horizon + t] != SampleShaping::Nominal
    }

    pub fn count(&self, kind: SampleShaping) -> usize {
        self.shaping.iter().filter(|&&s| s == kind).count()
    }

    pub fn perturbations(&self) -> impl Iterator<Item = &ControlVec> {
        self.trajectories.iter().flat_map(|t| t.perturbations.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    /// `−Σ ωᵢ ln ωᵢ`
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().filter(|&&w| w > 0.0).map(|&w| w * libm::log(w)).sum::<f64>()
    }

    /// `1 / Σ ωᵢ²`
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Draws `δu` from the nominal distribution (plain) or from the shaped one
/// (SCBF) for the given constraints on `δu`. Returns the draw, the
/// distribution it came from and what shaping did.
pub fn sample_perturbation<R: Rng + ?Sized>(
    mode: SamplingMode,
    nominal: &GaussianDist,
    constraints: &[ConstraintCoeffs],
    safety: &SafetyParams,
    tolerance: f64,
    rng: &mut R,
) -> Result<(ControlVec, GaussianDist, SampleShaping)> {
    let (dist, status) = match mode {
        SamplingMode::Plain => (*nominal, SampleShaping::Nominal),
        SamplingMode::Scbf => shaped_distribution(nominal, constraints, safety, tolerance)?,
    };
    let z: ControlVec = standard_normal(rng, nominal.dim());
    Ok((dist.transform(&z), dist, status))
}

fn shaped_distribution(
    nominal: &GaussianDist,
    constraints: &[ConstraintCoeffs],
    safety: &SafetyParams,
    tolerance: f64,
) -> Result<(GaussianDist, SampleShaping)> {
    if constraints.is_empty() {
        return Ok((*nominal, SampleShaping::Nominal));
    }
    let mut problem = ShaperProblem::new(*nominal, constraints.to_vec(), *safety);
    problem.tolerance = tolerance;
    let solution = shape(&problem)?;
    Ok(match solution.status {
        ShaperStatus::Unchanged => (*nominal, SampleShaping::Nominal),
        ShaperStatus::Shaped => (solution.shaped, SampleShaping::Shaped),
        ShaperStatus::Infeasible => match min_norm_mean(constraints, tolerance) {
            Some(mean) => {
                let point = GaussianDist::diagonal(mean, &ControlVec::zeros(nominal.dim()));
                if constraints.iter().all(|c| constraint_slack(&point, c, safety) >= -tolerance) {
                    (point, SampleShaping::Fallback)
                } else {
                    (*nominal, SampleShaping::Flagged)
                }
            }
            None => (*nominal, SampleShaping::Flagged),
        },
    })
}

/// Barrier constraints on `δu` at state `x` for the nominal input `u`.
fn perturbation_constraints<M: DynamicsModel + ?Sized>(
    model: &M,
    barriers: &[BarrierFunction],
    x: &StateVec,
    u: &ControlVec,
) -> Result<Vec<ConstraintCoeffs>> {
    barriers.iter().map(|bf| Ok(constraint_coeffs(model, bf, x)?.shifted_by(u))).collect()
}

/// `log N(x; μ, diag(s²))` up to the shared `−(m/2)log 2π`, over the
/// coordinates with positive spread.
fn log_density_diag(x: &ControlVec, dist: &GaussianDist) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.len() {
        let s = dist.factor[(j, j)];
        if s > 0.0 {
            let z = (x[j] - dist.mean[j]) / s;
            acc -= 0.5 * z * z + libm::log(s);
        }
    }
    acc
}

/// Rolls out all `K` samples for control step `step`. Trajectory `i` draws
/// from its own stream, per timestep first `δu` then the process noise,
/// so results do not depend on evaluation order.
pub fn evaluate_batch<M: DynamicsModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    barriers: &[BarrierFunction],
    schedule: &ControlSchedule,
    config: &MppiConfig,
    x0: &StateVec,
    step: u64,
) -> Result<RolloutBatch> {
    config.validate()?;
    check_dim("schedule horizon", config.horizon, schedule.horizon())?;
    check_dim("initial state", model.state_dim(), x0.len())?;
    check_dim("nominal sigma", model.control_dim(), config.nominal_sigma.len())?;
    let nominal = config.nominal();

    let shared: Option<Vec<(GaussianDist, SampleShaping)>> = if config.shared_shaping && config.mode == SamplingMode::Scbf {
        let mut x = *x0;
        let zero_noise = StateVec::zeros(model.state_dim());
        let mut per_step = Vec::with_capacity(config.horizon);
        for u in &schedule.inputs {
            let cs = perturbation_constraints(model, barriers, &x, u)?;
            per_step.push(shaped_distribution(&nominal, &cs, &config.safety, config.shaper_tolerance)?);
            x = em_step(model, &x, u, config.dt, &zero_noise)?;
        }
        Some(per_step)
    } else {
        None
    };

    let rollout_one = |i: usize| -> Result<(Trajectory, f64, Vec<SampleShaping>)> {
        let mut rng = substream(config.seed, step, i as u64);
        let mut traj = Trajectory::with_capacity(*x0, config.dt, config.horizon);
        let mut safeness = Vec::with_capacity(config.horizon + 1);
        safeness.push(is_safe(x0, barriers));
        let mut flags = Vec::with_capacity(config.horizon);
        let mut log_ratio = 0.0;
        let mut x = *x0;
        for (t, u) in schedule.inputs.iter().enumerate() {
            let (du, dist, status) = match &shared {
                Some(per_step) => {
                    let (dist, status) = per_step[t];
                    let z: ControlVec = standard_normal(&mut rng, nominal.dim());
                    (dist.transform(&z), dist, status)
                }
                None => {
                    let cs = match config.mode {
                        SamplingMode::Plain => Vec::new(),
                        SamplingMode::Scbf => perturbation_constraints(model, barriers, &x, u)?,
                    };
                    sample_perturbation(config.mode, &nominal, &cs, &config.safety, config.shaper_tolerance, &mut rng)?
                }
            };
            if config.likelihood_ratio && status != SampleShaping::Nominal {
                log_ratio += log_density_diag(&du, &dist) - log_density_diag(&du, &nominal);
            }
            let noise: StateVec = standard_normal(&mut rng, model.state_dim());
            x = em_step(model, &x, &u.add(&du), config.dt, &noise)?;
            traj.push(*u, du, x);
            safeness.push(is_safe(&x, barriers));
            flags.push(status);
        }
        let mut s = trajectory_cost(cost, &traj, &safeness)?;
        if config.likelihood_ratio {
            s += config.temperature * log_ratio;
        }
        Ok((traj, s, flags))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<(Trajectory, f64, Vec<SampleShaping>)>> = {
        use rayon::prelude::*;
        (0..config.samples).into_par_iter().map(rollout_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(Trajectory, f64, Vec<SampleShaping>)>> = (0..config.samples).map(rollout_one).collect();

    let mut batch = RolloutBatch {
        trajectories: Vec::with_capacity(config.samples),
        costs: Vec::with_capacity(config.samples),
        shaping: Vec::with_capacity(config.samples * config.horizon),
        horizon: config.horizon,
    };
    for r in results {
        let (traj, s, flags) = r?;
        batch.trajectories.push(traj);
        batch.costs.push(s);
        batch.shaping.extend(flags);
    }
    Ok(batch)
}

/// `ωᵢ ∝ exp(−(Sᵢ − β)/λ)` with `β = min S`, normalized to sum 1.
pub fn compute_weights(costs: &[f64], temperature: f64) -> Result<WeightVector> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter { name: "costs", reason: "at least one cost required" });
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter { name: "temperature", reason: "must be positive" });
    }
    if costs.iter().any(|c| c.is_nan()) {
        return Err(Error::NonFinite("costs"));
    }
    let beta = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !beta.is_finite() {
        return Err(Error::NonFinite("costs"));
    }
    let mut weights: Vec<f64> = costs.iter().map(|&s| libm::exp(-(s - beta) / temperature)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(WeightVector { weights })
}

/// `u_t ← u_t + Σᵢ ωᵢ·δu_{i,t}`
pub fn update_schedule(schedule: &ControlSchedule, batch: &RolloutBatch, weights: &WeightVector) -> Result<ControlSchedule> {
    check_dim("weights", batch.samples(), weights.weights.len())?;
    let mut inputs = schedule.inputs.clone();
    for traj in &batch.trajectories {
        check_dim("batch horizon", inputs.len(), traj.perturbations.len())?;
    }
    for (t, u) in inputs.iter_mut().enumerate() {
        for (traj, &w) in batch.trajectories.iter().zip(&weights.weights) {
            u.axpy(w, &traj.perturbations[t]);
        }
    }
    Ok(ControlSchedule { inputs })
}

/// Drops `u₀`, shifts left and appends `u_init`.
pub fn shift_horizon(schedule: &ControlSchedule, u_init: &ControlVec) -> ControlSchedule {
    let mut inputs: Vec<ControlVec> = schedule.inputs.iter().skip(1).copied().collect();
    inputs.push(*u_init);
    ControlSchedule { inputs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// `β = min S`
    pub baseline: f64,
    pub weight_entropy: f64,
    pub effective_sample_size: f64,
    pub shaped_samples: usize,
    pub flagged_samples: usize,
    /// Per-dimension unbiased variance of all `K × T` perturbations.
    pub var_du: ControlVec,
}

/// Receding-horizon controller state.
pub struct Controller<M> {
    pub model: M,
    pub cost: CostSpec,
    pub barriers: Vec<BarrierFunction>,
    pub config: MppiConfig,
    pub schedule: ControlSchedule,
    step: u64,
    last_batch: Option<RolloutBatch>,
}

impl<M: DynamicsModel> Controller<M> {
    pub fn new(model: M, cost: CostSpec, barriers: Vec<BarrierFunction>, config: MppiConfig) -> Result<Self> {
        config.validate()?;
        cost.validate()?;
        check_dim("controller nominal sigma", model.control_dim(), config.nominal_sigma.len())?;
        check_dim("cost control weight", model.control_dim(), cost.control_weight.rows())?;
        for bf in &barriers {
            check_dim("controller barrier", model.state_dim(), bf.state_dim())?;
        }
        let schedule = ControlSchedule::constant(config.horizon, config.u_init);
        Ok(Self { model, cost, barriers, config, schedule, step: 0, last_batch: None })
    }

    /// Control steps taken so far.
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Batch of the most recent step.
    pub fn last_batch(&self) -> Option<&RolloutBatch> {
        self.last_batch.as_ref()
    }

    /// One MPPI iteration at `x`: sample, weight, update, then shift.
    /// Returns the input to execute.
    pub fn control_step(&mut self, x: &StateVec) -> Result<(ControlVec, StepDiagnostics)> {
        let batch = evaluate_batch(&self.model, &self.cost, &self.barriers, &self.schedule, &self.config, x, self.step)?;
        let weights = compute_weights(&batch.costs, self.config.temperature)?;
        let updated = update_schedule(&self.schedule, &batch, &weights)?;
        let u0 = updated.first();
        let draws: Vec<ControlVec> = batch.perturbations().copied().collect();
        let var_du = if draws.len() >= 2 {
            estimate_var_du(&draws)?
        } else {
            ControlVec::zeros(self.model.control_dim())
        };
        let diagnostics = StepDiagnostics {
            baseline: batch.costs.iter().copied().fold(f64::INFINITY, f64::min),
            weight_entropy: weights.entropy(),
            effective_sample_size: weights.effective_sample_size(),
            shaped_samples: batch.shaping.iter().filter(|&&s| s != SampleShaping::Nominal).count(),
            flagged_samples: batch.count(SampleShaping::Flagged),
            var_du,
        };
        self.schedule = shift_horizon(&updated, &self.config.u_init);
        self.step += 1;
        self.last_batch = Some(batch);
        Ok((u0, diagnostics))
    }
}
