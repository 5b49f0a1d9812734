//! Stage, running and trajectory costs. Costs read only the planar
//! position `(x, y) = (state[0], state[1])`.

use crate::dynamics::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{ControlMatrix, ControlVec, StateVec};

/// Terminal cost `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TerminalCost {
    #[default]
    Zero,
    /// `weight · ‖(x, y) − goal‖²`
    GoalDistance { weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub goal: [f64; 2],
    pub state_weight: f64,
    /// Added to the stage cost of every unsafe state.
    pub obstacle_penalty: f64,
    /// `R`, symmetric positive definite.
    pub control_weight: ControlMatrix,
    /// `ν`: covariance ratio between injected and process disturbance.
    pub variance_ratio: f64,
    pub terminal: TerminalCost,
}

impl CostSpec {
    /// Narrow-passage defaults: unit state weight, penalty 1000, `R = I`,
    /// `ν = 1`, no terminal cost.
    pub fn new(goal: [f64; 2], control_dim: usize) -> Self {
        Self {
            goal,
            state_weight: 1.0,
            obstacle_penalty: 1000.0,
            control_weight: ControlMatrix::identity(control_dim),
            variance_ratio: 1.0,
            terminal: TerminalCost::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.state_weight >= 0.0) {
            return Err(Error::InvalidParameter { name: "state_weight", reason: "must be nonnegative" });
        }
        if !(self.obstacle_penalty >= 0.0) {
            return Err(Error::InvalidParameter { name: "obstacle_penalty", reason: "must be nonnegative" });
        }
        if !(self.variance_ratio > 0.0) {
            return Err(Error::InvalidParameter { name: "variance_ratio", reason: "must be positive" });
        }
        let r = &self.control_weight;
        if r.rows() != r.cols() || !r.is_symmetric(1e-12) || r.symmetric_eigenvalues()[0] <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "control_weight",
                reason: "must be symmetric positive definite",
            });
        }
        if let TerminalCost::GoalDistance { weight } = self.terminal {
            if !(weight >= 0.0) {
                return Err(Error::InvalidParameter { name: "terminal.weight", reason: "must be nonnegative" });
            }
        }
        Ok(())
    }

    pub fn goal_distance_sq(&self, x: &StateVec) -> f64 {
        let dx = x[0] - self.goal[0];
        let dy = x[1] - self.goal[1];
        dx * dx + dy * dy
    }

    pub fn terminal_cost(&self, x: &StateVec) -> f64 {
        match self.terminal {
            TerminalCost::Zero => 0.0,
            TerminalCost::GoalDistance { weight } => weight * self.goal_distance_sq(x),
        }
    }
}

/// `q(x) = w·‖(x, y) − goal‖² + penalty·1[unsafe]`
pub fn state_cost(spec: &CostSpec, x: &StateVec, safe: bool) -> f64 {
    let penalty = if safe { 0.0 } else { spec.obstacle_penalty };
    spec.state_weight * spec.goal_distance_sq(x) + penalty
}

/// `q̃ = q(x) + ((1 − ν⁻¹)/2)·εᵀRε + vᵀRε + ½vᵀRv`
pub fn running_cost(spec: &CostSpec, x: &StateVec, safe: bool, v: &ControlVec, eps: &ControlVec) -> f64 {
    let r = &spec.control_weight;
    let noise_coeff = 0.5 * (1.0 - 1.0 / spec.variance_ratio);
    state_cost(spec, x, safe)
        + noise_coeff * r.quadratic_form(eps)
        + r.bilinear_form(v, eps)
        + 0.5 * r.quadratic_form(v)
}

/// `φ(x_T) + Σₜ q̃(x_{t+1}, v_t, ε_t)`. The stage cost of step `t` is read
/// at the post-step state, so `safeness[0]` (the initial state) does not
/// enter the sum.
pub fn trajectory_cost(spec: &CostSpec, traj: &Trajectory, safeness: &[bool]) -> Result<f64> {
    check_dim("trajectory_cost safeness", traj.states.len(), safeness.len())?;
    let stages: f64 = (0..traj.steps())
        .map(|t| {
            running_cost(
                spec,
                &traj.states[t + 1],
                safeness[t + 1],
                &traj.controls[t],
                &traj.perturbations[t],
            )
        })
        .sum();
    Ok(spec.terminal_cost(traj.final_state()) + stages)
}
