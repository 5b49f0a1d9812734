//! Control-affine SDEs `dx = (f(x) + g(x)u) dt + σ(x) dW` and their
//! Euler–Maruyama discretization.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{ControlVec, InputMatrix, StateMatrix, StateVec};
use crate::rng::standard_normal;

/// Drift `f`, input map `g` and diffusion `σ` of a control-affine SDE.
///
/// Implementations must be total on finite states and return outputs of
/// shape `n`, `n × m` and `n × n`.
pub trait DynamicsModel: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn drift(&self, x: &StateVec) -> StateVec;
    fn input_map(&self, x: &StateVec) -> InputMatrix;
    fn diffusion(&self, x: &StateVec) -> StateMatrix;

    /// `Some((F, f₀))` when the drift is exactly `F·x + f₀`. Used by the
    /// closed-form high-order barrier lift.
    fn affine_drift(&self) -> Option<(StateMatrix, StateVec)> {
        None
    }

    /// `Some(σ)` when the diffusion does not depend on the state.
    fn constant_diffusion(&self) -> Option<StateMatrix> {
        None
    }
}

impl<M: DynamicsModel + ?Sized> DynamicsModel for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        (**self).drift(x)
    }
    fn input_map(&self, x: &StateVec) -> InputMatrix {
        (**self).input_map(x)
    }
    fn diffusion(&self, x: &StateVec) -> StateMatrix {
        (**self).diffusion(x)
    }
    fn affine_drift(&self) -> Option<(StateMatrix, StateVec)> {
        (**self).affine_drift()
    }
    fn constant_diffusion(&self) -> Option<StateMatrix> {
        (**self).constant_diffusion()
    }
}

/// Planar unicycle: state `(x, y, θ)`, input `(v, ω)`, zero drift and
/// isotropic diffusion `σ = scale · I₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unicycle {
    pub sigma_scale: f64,
}

impl Default for Unicycle {
    fn default() -> Self {
        Self { sigma_scale: 1.0 }
    }
}

/// Unicycle with identity diffusion.
pub fn unicycle_model() -> Unicycle {
    Unicycle::default()
}

impl DynamicsModel for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn drift(&self, _x: &StateVec) -> StateVec {
        StateVec::zeros(3)
    }
    fn input_map(&self, x: &StateVec) -> InputMatrix {
        let (s, c) = libm::sincos(x[2]);
        InputMatrix::from_rows(&[&[c, 0.0], &[s, 0.0], &[0.0, 1.0]])
    }
    fn diffusion(&self, _x: &StateVec) -> StateMatrix {
        StateMatrix::scaled_identity(3, self.sigma_scale)
    }
    fn affine_drift(&self) -> Option<(StateMatrix, StateVec)> {
        Some((StateMatrix::zeros(3, 3), StateVec::zeros(3)))
    }
    fn constant_diffusion(&self) -> Option<StateMatrix> {
        Some(self.diffusion(&StateVec::zeros(3)))
    }
}

/// `ẋ = v, v̇ = u` with diffusion `scale · I₂`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleIntegrator {
    pub sigma_scale: f64,
}

impl DoubleIntegrator {
    fn drift_matrix() -> StateMatrix {
        StateMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
    }
}

impl DynamicsModel for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        Self::drift_matrix().mul_vec(x)
    }
    fn input_map(&self, _x: &StateVec) -> InputMatrix {
        InputMatrix::from_rows(&[&[0.0], &[1.0]])
    }
    fn diffusion(&self, _x: &StateVec) -> StateMatrix {
        StateMatrix::scaled_identity(2, self.sigma_scale)
    }
    fn affine_drift(&self) -> Option<(StateMatrix, StateVec)> {
        Some((Self::drift_matrix(), StateVec::zeros(2)))
    }
    fn constant_diffusion(&self) -> Option<StateMatrix> {
        Some(self.diffusion(&StateVec::zeros(2)))
    }
}

/// Time-indexed rollout record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `T + 1` states, starting with the initial state.
    pub states: Vec<StateVec>,
    /// Nominal inputs `u_t`, length `T`.
    pub controls: Vec<ControlVec>,
    /// Perturbations `δu_t`, length `T`.
    pub perturbations: Vec<ControlVec>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(x0: StateVec, dt: f64) -> Self {
        Self {
            states: alloc::vec![x0],
            controls: Vec::new(),
            perturbations: Vec::new(),
            dt,
        }
    }

    pub fn with_capacity(x0: StateVec, dt: f64, steps: usize) -> Self {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(x0);
        Self {
            states,
            controls: Vec::with_capacity(steps),
            perturbations: Vec::with_capacity(steps),
            dt,
        }
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn final_state(&self) -> &StateVec {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn push(&mut self, u: ControlVec, du: ControlVec, next: StateVec) {
        self.controls.push(u);
        self.perturbations.push(du);
        self.states.push(next);
    }
}

/// `f(x) + g(x)·u`
pub fn drift_eval<M: DynamicsModel + ?Sized>(model: &M, x: &StateVec, u: &ControlVec) -> Result<StateVec> {
    check_dim("drift_eval state", model.state_dim(), x.len())?;
    check_dim("drift_eval control", model.control_dim(), u.len())?;
    let mut dx = model.drift(x);
    dx.axpy(1.0, &model.input_map(x).mul_vec(u));
    Ok(dx)
}

/// One Euler–Maruyama step `x + (f + g·u)·dt + σ·noise·√dt`, where `noise`
/// holds i.i.d. standard normal draws.
pub fn em_step<M: DynamicsModel + ?Sized>(
    model: &M,
    x: &StateVec,
    u: &ControlVec,
    dt: f64,
    noise: &StateVec,
) -> Result<StateVec> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "time step must be positive",
        });
    }
    check_dim("em_step noise", model.state_dim(), noise.len())?;
    let mut next = *x;
    next.axpy(dt, &drift_eval(model, x, u)?);
    next.axpy(libm::sqrt(dt), &model.diffusion(x).mul_vec(noise));
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite("em_step"))
    }
}

/// Draws an `n`-dimensional noise vector and takes one step with input
/// `u + du`.
pub fn em_step_sampled<M: DynamicsModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x: &StateVec,
    u: &ControlVec,
    du: &ControlVec,
    dt: f64,
    rng: &mut R,
) -> Result<StateVec> {
    let noise: StateVec = standard_normal(rng, model.state_dim());
    em_step(model, x, &u.add(du), dt, &noise)
}

/// Applies `em_step` `T` times with effective input `u_t + δu_t`.
pub fn rollout<M: DynamicsModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    x0: &StateVec,
    controls: &[ControlVec],
    perturbations: &[ControlVec],
    dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_dim("rollout perturbations", controls.len(), perturbations.len())?;
    if controls.is_empty() {
        return Err(Error::InvalidParameter {
            name: "controls",
            reason: "rollout needs at least one step",
        });
    }
    check_dim("rollout initial state", model.state_dim(), x0.len())?;
    let mut traj = Trajectory::with_capacity(*x0, dt, controls.len());
    let mut x = *x0;
    for (u, du) in controls.iter().zip(perturbations) {
        x = em_step_sampled(model, &x, u, du, dt, rng)?;
        traj.push(*u, *du, x);
    }
    Ok(traj)
}
