//! Sampling-based stochastic optimal control with stochastic control
//! barrier functions.
//!
//! The crate is `no_std` (with `alloc`). It provides Euler–Maruyama
//! rollouts of control-affine SDEs, running and trajectory costs, barrier
//! functions with their linear chance constraints on the input, Gaussian
//! distribution shaping against those constraints, the MPPI control loop
//! and the Hoeffding/Chebyshev sample-size bounds.
//!
//! Enable `std` for `std::error::Error` on [`Error`] and `parallel` to
//! spread rollouts over a rayon pool; outputs do not depend on either.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod barrier;
pub mod complexity;
pub mod cost;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod mppi;
pub mod reference;
pub mod rng;
pub mod shaper;

pub use barrier::{AlphaForm, BarrierFunction, ConstraintCoeffs, SafetyParams};
pub use cost::{CostSpec, TerminalCost};
pub use dynamics::{DoubleIntegrator, DynamicsModel, Trajectory, Unicycle};
pub use error::{Error, Result};
pub use linalg::{ControlMatrix, ControlVec, StateMatrix, StateVec};
pub use mppi::{Controller, MppiConfig, SamplingMode};
pub use shaper::{GaussianDist, ShaperProblem, ShaperSolution, ShaperStatus};
