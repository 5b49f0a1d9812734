//! Barrier functions with analytic derivatives, Itô-corrected constraint
//! coefficients, and the high-relative-degree lifting chain.
//!
//! Barriers belong to one closed-form family
//!
//! ```text
//! h(x) = cᵀx + d + a·sin(ω·x_k + φ)
//! ```
//!
//! which covers half-planes, constants and the sinusoidal passage walls,
//! and which stays closed under the lift `h ↦ ∇h·f + ½Tr(σᵀ∇²hσ) + h` for
//! affine drift and constant diffusion (with `f_k` independent of `x`
//! whenever `a ≠ 0`).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dynamics::DynamicsModel;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::normal_quantile;
use crate::linalg::{ControlVec, StateMatrix, StateVec};

/// Highest supported lift order.
pub const MAX_LIFT_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub axis: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierFunction {
    pub name: String,
    pub linear: StateVec,
    pub offset: f64,
    pub wave: Option<Wave>,
}

impl BarrierFunction {
    pub fn affine(name: impl Into<String>, linear: StateVec, offset: f64) -> Self {
        Self { name: name.into(), linear, offset, wave: None }
    }

    pub fn constant(name: impl Into<String>, value: f64, state_dim: usize) -> Self {
        Self::affine(name, StateVec::zeros(state_dim), value)
    }

    pub fn state_dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, x: &StateVec) -> f64 {
        let mut h = self.linear.dot(x) + self.offset;
        if let Some(w) = &self.wave {
            h += w.amplitude * libm::sin(w.frequency * x[w.axis] + w.phase);
        }
        h
    }

    pub fn gradient(&self, x: &StateVec) -> StateVec {
        let mut g = self.linear;
        if let Some(w) = &self.wave {
            g[w.axis] += w.amplitude * w.frequency * libm::cos(w.frequency * x[w.axis] + w.phase);
        }
        g
    }

    pub fn hessian(&self, x: &StateVec) -> StateMatrix {
        let n = self.state_dim();
        let mut h = StateMatrix::zeros(n, n);
        if let Some(w) = &self.wave {
            h[(w.axis, w.axis)] =
                -w.amplitude * w.frequency * w.frequency * libm::sin(w.frequency * x[w.axis] + w.phase);
        }
        h
    }
}

/// Walls of the planar passage `y ∈ (sin(ω·x), sin(ω·x) + width)`:
/// `h₁ = y − sin(ω·x)` and `h₂ = sin(ω·x) + width − y`, over a state whose
/// first two coordinates are `(x, y)`.
pub fn narrow_passage(width: f64, frequency: f64, state_dim: usize) -> [BarrierFunction; 2] {
    let wave = |amplitude| Wave { axis: 0, amplitude, frequency, phase: 0.0 };
    let mut lower = StateVec::zeros(state_dim);
    lower[1] = 1.0;
    let mut upper = StateVec::zeros(state_dim);
    upper[1] = -1.0;
    [
        BarrierFunction { name: "h1".into(), linear: lower, offset: 0.0, wave: Some(wave(-1.0)) },
        BarrierFunction { name: "h2".into(), linear: upper, offset: width, wave: Some(wave(1.0)) },
    ]
}

/// `h = 1 − x` over the double-integrator state `(x, v)`.
pub fn double_integrator_wall() -> BarrierFunction {
    BarrierFunction::affine("wall", StateVec::new(&[-1.0, 0.0]), 1.0)
}

/// Linear chance-constraint data `A·u ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCoeffs {
    pub a: ControlVec,
    pub b: f64,
}

impl ConstraintCoeffs {
    /// Same constraint for the perturbation `δu` of an input `u + δu`.
    pub fn shifted_by(&self, u: &ControlVec) -> Self {
        Self { a: self.a, b: self.b - self.a.dot(u) }
    }
}

/// How the confidence multiplier enters the deterministic surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaForm {
    /// `A·μ − α·AΣAᵀ ≥ b`
    #[default]
    Variance,
    /// `A·μ − α·√(AΣAᵀ) ≥ b`
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    pub delta: f64,
    pub alpha: f64,
    pub alpha_form: AlphaForm,
}

impl SafetyParams {
    /// `α = Φ⁻¹(1 − δ)`
    pub fn from_delta(delta: f64, alpha_form: AlphaForm) -> Result<Self> {
        let params = Self { delta, alpha: normal_quantile(1.0 - delta), alpha_form };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter { name: "delta", reason: "must lie in (0, 1)" });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", reason: "must be finite and nonnegative" });
        }
        Ok(())
    }
}

impl Default for SafetyParams {
    /// `δ = 0.003` (safety probability 0.997), variance form.
    fn default() -> Self {
        Self::from_delta(0.003, AlphaForm::Variance).expect("valid default")
    }
}

/// `h(x) ≥ 0` for every barrier. Boundary points count as safe.
pub fn is_safe(x: &StateVec, barriers: &[BarrierFunction]) -> bool {
    barriers.iter().all(|b| b.value(x) >= 0.0)
}

struct LieTerms {
    h: f64,
    lf: f64,
    lg: ControlVec,
    ito: f64,
}

fn lie_terms<M: DynamicsModel + ?Sized>(model: &M, bf: &BarrierFunction, x: &StateVec) -> Result<LieTerms> {
    check_dim("barrier state", model.state_dim(), bf.state_dim())?;
    check_dim("barrier evaluation point", model.state_dim(), x.len())?;
    let grad = bf.gradient(x);
    let sigma = model.diffusion(x);
    Ok(LieTerms {
        h: bf.value(x),
        lf: grad.dot(&model.drift(x)),
        lg: model.input_map(x).tr_mul_vec(&grad),
        ito: 0.5 * bf.hessian(x).sandwich_trace(&sigma),
    })
}

/// `L_f h + L_g h·u + ½Tr(σᵀ∇²hσ) + h`; nonnegative iff the stochastic
/// barrier condition holds at `(x, u)`.
pub fn scbf_margin<M: DynamicsModel + ?Sized>(
    model: &M,
    bf: &BarrierFunction,
    x: &StateVec,
    u: &ControlVec,
) -> Result<f64> {
    check_dim("scbf_margin control", model.control_dim(), u.len())?;
    let t = lie_terms(model, bf, x)?;
    Ok(t.lf + t.lg.dot(u) + t.ito + t.h)
}

/// `A = ∇hᵀg`, `b = −h − ∇hᵀf − ½Tr(σᵀ∇²hσ)`.
pub fn constraint_coeffs<M: DynamicsModel + ?Sized>(
    model: &M,
    bf: &BarrierFunction,
    x: &StateVec,
) -> Result<ConstraintCoeffs> {
    let t = lie_terms(model, bf, x)?;
    Ok(ConstraintCoeffs { a: t.lg, b: -t.h - t.lf - t.ito })
}

/// Levels `h⁰ … hʳ` of the high-order recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct HighOrderChain {
    pub levels: Vec<BarrierFunction>,
}

impl HighOrderChain {
    pub fn top(&self) -> &BarrierFunction {
        self.levels.last().expect("chain is never empty")
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Next level `∇h·f + ½Tr(σᵀ∇²hσ) + h` in closed form.
fn lift_once<M: DynamicsModel + ?Sized>(model: &M, bf: &BarrierFunction, level: usize) -> Result<BarrierFunction> {
    let (f_mat, f0) = model
        .affine_drift()
        .ok_or(Error::UnsupportedOrder("drift is not affine"))?;
    let n = model.state_dim();
    // ∇(cᵀ(Fx + f₀)) = Fᵀc
    let linear = bf.linear.add(&f_mat.tr_mul_vec(&bf.linear));
    let offset = bf.offset + bf.linear.dot(&f0);
    let mut wave = bf.wave;
    if let Some(w) = wave.as_mut() {
        let k = w.axis;
        let row_free = (0..n).all(|j| f_mat[(k, j)] == 0.0) && f0[k] == 0.0;
        if !row_free {
            return Err(Error::UnsupportedOrder("drift acts on the sinusoidal axis"));
        }
        let sigma = model
            .constant_diffusion()
            .ok_or(Error::UnsupportedOrder("diffusion is state dependent"))?;
        let sigma_sq_kk: f64 = (0..n).map(|j| sigma[(k, j)] * sigma[(k, j)]).sum();
        // ½Tr(σᵀHσ) = ½(σσᵀ)_kk·(−a ω² sin(·))
        w.amplitude *= 1.0 - 0.5 * w.frequency * w.frequency * sigma_sq_kk;
    }
    Ok(BarrierFunction {
        name: format!("{}^{}", base_name(&bf.name), level),
        linear,
        offset,
        wave,
    })
}

fn base_name(name: &str) -> &str {
    name.split('^').next().unwrap_or(name)
}

/// Builds `h⁰ = h, …, hʳ` for `r ≤ MAX_LIFT_ORDER`.
pub fn high_order_lift<M: DynamicsModel + ?Sized>(
    model: &M,
    bf: &BarrierFunction,
    r: usize,
) -> Result<HighOrderChain> {
    if r > MAX_LIFT_ORDER {
        return Err(Error::UnsupportedOrder("requested order exceeds the supported maximum"));
    }
    check_dim("high_order_lift barrier", model.state_dim(), bf.state_dim())?;
    let mut levels = Vec::with_capacity(r + 1);
    levels.push(bf.clone());
    for level in 1..=r {
        let next = lift_once(model, levels.last().unwrap(), level)?;
        levels.push(next);
    }
    Ok(HighOrderChain { levels })
}

/// Constraint coefficients of the top level of the chain.
pub fn high_order_coeffs<M: DynamicsModel + ?Sized>(
    model: &M,
    chain: &HighOrderChain,
    x: &StateVec,
) -> Result<ConstraintCoeffs> {
    constraint_coeffs(model, chain.top(), x)
}

/// Diagnostic for the high-order guarantee: `∇hʳ·g(x)·u ≥ 0` for every level
/// below the top. The controller reports it but never acts on it.
pub fn lower_levels_nondecreasing<M: DynamicsModel + ?Sized>(
    model: &M,
    chain: &HighOrderChain,
    x: &StateVec,
    u: &ControlVec,
) -> bool {
    let g = model.input_map(x);
    chain.levels[..chain.levels.len() - 1]
        .iter()
        .all(|h| g.tr_mul_vec::<_, { crate::linalg::MAX_CONTROL_DIM }>(&h.gradient(x)).dot(u) >= 0.0)
}

/// Central-difference gradient, for validation only.
pub fn finite_difference_gradient(h: impl Fn(&StateVec) -> f64, x: &StateVec, step: f64) -> StateVec {
    StateVec::from_fn(x.len(), |i| {
        let mut plus = *x;
        let mut minus = *x;
        plus[i] += step;
        minus[i] -= step;
        (h(&plus) - h(&minus)) / (2.0 * step)
    })
}

/// Central-difference Jacobian of a gradient field, for validation only.
pub fn finite_difference_hessian(grad: impl Fn(&StateVec) -> StateVec, x: &StateVec, step: f64) -> StateMatrix {
    let n = x.len();
    let mut hess = StateMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = *x;
        let mut minus = *x;
        plus[j] += step;
        minus[j] -= step;
        let (gp, gm) = (grad(&plus), grad(&minus));
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    hess
}
