//! Gaussian distribution shaping under barrier chance constraints.
//!
//! Given a nominal perturbation distribution `N(μ₀, P₀P₀ᵀ)` and linear
//! chance constraints `Pr(A·u ≥ b) ≥ 1 − δ`, find the nearest `(μ, P)`
//! (cost `‖μ − μ₀‖₁ + ‖P − P₀‖_F`) satisfying the deterministic surrogate
//! `A·μ − α·φ(AΣAᵀ) ≥ b` for every constraint, where `φ` is the identity
//! (variance form) or the square root (std-dev form).
//!
//! `P` is restricted to nonnegative diagonals and `P₀` must be diagonal.
//! With that restriction every constraint sees `P` only through
//! `AΣAᵀ = Σⱼ Aⱼ²pⱼ²`, and when all constraint normals are collinear (a
//! single barrier, or the two walls of a passage) the problem collapses
//! to a convex scalar search over `s = √(eᵀΣe)` with closed-form inner
//! solutions. Non-collinear constraint sets go through a small primal
//! log-barrier interior-point method.

use alloc::vec::Vec;
use rand::Rng;

use crate::barrier::{AlphaForm, ConstraintCoeffs, SafetyParams};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{solve_dense, ControlMatrix, ControlVec, Matrix, MAX_CONTROL_DIM};
use crate::rng::standard_normal;

/// `N(mean, factor·factorᵀ)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDist {
    pub mean: ControlVec,
    pub factor: ControlMatrix,
}

impl GaussianDist {
    pub fn new(mean: ControlVec, factor: ControlMatrix) -> Self {
        debug_assert_eq!(mean.len(), factor.rows());
        Self { mean, factor }
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(mean: ControlVec, std_devs: &ControlVec) -> Self {
        Self::new(mean, ControlMatrix::diagonal(std_devs.as_slice()))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> ControlMatrix {
        self.factor.gram()
    }

    /// `AΣAᵀ = ‖Pᵀa‖²`
    pub fn projected_variance(&self, a: &ControlVec) -> f64 {
        let w: ControlVec = self.factor.tr_mul_vec(a);
        w.dot(&w)
    }

    /// `mean + P·z` for a standard normal `z`.
    pub fn transform(&self, z: &ControlVec) -> ControlVec {
        self.mean.add(&self.factor.mul_vec(z))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ControlVec {
        let z: ControlVec = standard_normal(rng, self.dim());
        self.transform(&z)
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.factor.is_finite()
    }
}

/// Surrogate slack `A·μ − α·φ(AΣAᵀ) − b`.
pub fn constraint_slack(dist: &GaussianDist, c: &ConstraintCoeffs, params: &SafetyParams) -> f64 {
    let var = dist.projected_variance(&c.a);
    let spread = match params.alpha_form {
        AlphaForm::Variance => params.alpha * var,
        AlphaForm::StdDev => params.alpha * libm::sqrt(var),
    };
    c.a.dot(&dist.mean) - spread - c.b
}

pub fn constraint_satisfied(dist: &GaussianDist, c: &ConstraintCoeffs, params: &SafetyParams) -> bool {
    constraint_slack(dist, c, params) >= 0.0
}

/// Minimum eigenvalue allowed for the block matrix to count as PSD.
pub const LMI_EIGEN_TOLERANCE: f64 = 1e-9;

/// The `(m+1) × (m+1)` block `[[I, w], [wᵀ, A·μ − b]]` with `w = √α·PᵀAᵀ`.
pub fn lmi_block(dist: &GaussianDist, c: &ConstraintCoeffs, alpha: f64) -> Matrix<5, 5> {
    let m = dist.dim();
    let w: ControlVec = dist.factor.tr_mul_vec(&c.a);
    let root = libm::sqrt(alpha);
    let mut block = Matrix::<5, 5>::zeros(m + 1, m + 1);
    for i in 0..m {
        block[(i, i)] = 1.0;
        block[(i, m)] = root * w[i];
        block[(m, i)] = root * w[i];
    }
    block[(m, m)] = c.a.dot(&dist.mean) - c.b;
    block
}

/// Positive semidefiniteness of [`lmi_block`], judged by its smallest
/// eigenvalue against [`LMI_EIGEN_TOLERANCE`].
pub fn lmi_feasible(dist: &GaussianDist, c: &ConstraintCoeffs, params: &SafetyParams) -> bool {
    lmi_block(dist, c, params.alpha).symmetric_eigenvalues()[0] >= -LMI_EIGEN_TOLERANCE
}

/// Upper bound `(A·μ − b)/α` on `AΣAᵀ` implied by the variance-form
/// constraint; `None` when the mean alone already violates it.
pub fn variance_cap(c: &ConstraintCoeffs, mean: &ControlVec, params: &SafetyParams) -> Option<f64> {
    let margin = c.a.dot(mean) - c.b;
    if margin < 0.0 {
        return None;
    }
    if params.alpha > 0.0 {
        Some(margin / params.alpha)
    } else {
        Some(f64::INFINITY)
    }
}

/// Monte Carlo estimate of `Pr(A·u < b)` for `u ~ dist`.
pub fn chance_violation_rate<R: Rng + ?Sized>(dist: &GaussianDist, c: &ConstraintCoeffs, n: usize, rng: &mut R) -> f64 {
    assert!(n >= 1, "need at least one draw");
    let violations = (0..n).filter(|_| c.a.dot(&dist.sample(rng)) < c.b).count();
    violations as f64 / n as f64
}

/// Minimal-norm `μ` with `Aₖ·μ ≥ bₖ` for all `k` (Hildreth's dual
/// coordinate ascent). `None` if the iteration does not reach a point
/// satisfying every constraint within `tol`.
pub fn min_norm_mean(constraints: &[ConstraintCoeffs], tol: f64) -> Option<ControlVec> {
    let m = constraints.first()?.a.len();
    let mut duals = alloc::vec![0.0; constraints.len()];
    let mut mu = ControlVec::zeros(m);
    for _ in 0..10_000 {
        let mut moved = 0.0f64;
        for (k, c) in constraints.iter().enumerate() {
            let aa = c.a.dot(&c.a);
            if aa == 0.0 {
                continue;
            }
            let next = (duals[k] + (c.b - c.a.dot(&mu)) / aa).max(0.0);
            let delta = next - duals[k];
            if delta != 0.0 {
                mu.axpy(delta, &c.a);
                duals[k] = next;
                moved = moved.max(libm::fabs(delta) * libm::sqrt(aa));
            }
        }
        if moved <= 1e-14 {
            break;
        }
    }
    constraints.iter().all(|c| c.a.dot(&mu) - c.b >= -tol).then_some(mu)
}

/// Norm used for the covariance-factor term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorNorm {
    #[default]
    Frobenius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShaperProblem {
    pub nominal: GaussianDist,
    pub constraints: Vec<ConstraintCoeffs>,
    pub params: SafetyParams,
    pub norm: FactorNorm,
    pub tolerance: f64,
}

impl ShaperProblem {
    pub fn new(nominal: GaussianDist, constraints: Vec<ConstraintCoeffs>, params: SafetyParams) -> Self {
        Self { nominal, constraints, params, norm: FactorNorm::Frobenius, tolerance: DEFAULT_TOLERANCE }
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShaperStatus {
    Unchanged,
    Shaped,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShaperSolution {
    pub shaped: GaussianDist,
    /// `‖μ − μ₀‖₁ + ‖P − P₀‖_F`
    pub objective: f64,
    pub status: ShaperStatus,
}

/// `‖μ − μ₀‖₁ + ‖P − P₀‖_F`
pub fn shaping_objective(nominal: &GaussianDist, shaped: &GaussianDist) -> f64 {
    shaped.mean.sub(&nominal.mean).norm_l1() + shaped.factor.sub(&nominal.factor).frobenius_norm()
}

/// Solves the shaping problem. Contract violations (dimension mismatch,
/// non-diagonal or negative nominal factor, empty constraint set) are
/// errors; an unsatisfiable constraint set is reported through
/// [`ShaperStatus::Infeasible`] with the nominal returned unchanged.
pub fn shape(problem: &ShaperProblem) -> Result<ShaperSolution> {
    let nominal = &problem.nominal;
    let m = nominal.dim();
    validate(problem)?;
    let params = &problem.params;
    let tol = problem.tolerance;

    let unchanged = ShaperSolution { shaped: *nominal, objective: 0.0, status: ShaperStatus::Unchanged };
    if problem.constraints.iter().all(|c| constraint_slack(nominal, c, params) >= -tol) {
        return Ok(unchanged);
    }

    let infeasible = ShaperSolution { status: ShaperStatus::Infeasible, ..unchanged };
    let mut active: Vec<ConstraintCoeffs> = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        if c.a.iter().all(|&v| v == 0.0) {
            // only b decides; the surrogate reads 0 ≥ b
            if c.b > tol {
                return Ok(infeasible);
            }
        } else {
            active.push(*c);
        }
    }

    let p0 = nominal.factor.diag();
    let mut p0c = ControlVec::zeros(m);
    p0c.as_mut_slice().copy_from_slice(&p0.as_slice()[..m]);

    let solved = match collinear_direction(&active) {
        Some((dir, scales)) => solve_collinear(&nominal.mean, &p0c, &dir, &active, &scales, params),
        None => interior_point(&nominal.mean, &p0c, &active, params, tol),
    };
    let Some((mean, p)) = solved else {
        return Ok(infeasible);
    };
    let mut shaped = GaussianDist::new(mean, ControlMatrix::diagonal(p.as_slice()));
    polish(&mut shaped, &active, params);
    Ok(ShaperSolution { shaped, objective: shaping_objective(nominal, &shaped), status: ShaperStatus::Shaped })
}

/// Moves the mean along `Aₖ` to clear rounding-level violations, so that a
/// solution on the boundary is feasible exactly rather than to within an
/// ulp (which matters once the factor has collapsed to zero).
fn polish(dist: &mut GaussianDist, constraints: &[ConstraintCoeffs], params: &SafetyParams) {
    for _ in 0..4 {
        let mut clean = true;
        for c in constraints {
            let slack = constraint_slack(dist, c, params);
            let aa = c.a.dot(&c.a);
            if slack < 0.0 && slack > -1e-6 && aa > 0.0 {
                let target = 1e-12 * (1.0 + c.b.abs());
                dist.mean.axpy((target - slack) / aa, &c.a);
                clean = false;
            }
        }
        if clean {
            return;
        }
    }
}

fn validate(problem: &ShaperProblem) -> Result<()> {
    let nominal = &problem.nominal;
    let m = nominal.dim();
    check_dim("shaper factor rows", m, nominal.factor.rows())?;
    check_dim("shaper factor cols", m, nominal.factor.cols())?;
    if !nominal.factor.is_diagonal() || nominal.factor.diag().iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "nominal.factor",
            reason: "shaping requires a nonnegative diagonal covariance factor",
        });
    }
    if !nominal.is_finite() {
        return Err(Error::NonFinite("shaper nominal"));
    }
    if problem.constraints.is_empty() {
        return Err(Error::InvalidParameter { name: "constraints", reason: "at least one constraint required" });
    }
    if !(problem.tolerance > 0.0) {
        return Err(Error::InvalidParameter { name: "tolerance", reason: "must be positive" });
    }
    for c in &problem.constraints {
        check_dim("shaper constraint", m, c.a.len())?;
        if !c.a.is_finite() || !c.b.is_finite() {
            return Err(Error::NonFinite("shaper constraint"));
        }
    }
    problem.params.validate()
}

/// Common direction `e` and scales `λₖ` with `Aₖ = λₖ·e`, if one exists.
fn collinear_direction(cs: &[ConstraintCoeffs]) -> Option<(ControlVec, Vec<f64>)> {
    let e = cs.first()?.a;
    let ee = e.dot(&e);
    let mut scales = Vec::with_capacity(cs.len());
    for c in cs {
        let lambda = c.a.dot(&e) / ee;
        let residual = c.a.sub(&e.scaled(lambda)).norm();
        if residual > 1e-12 * c.a.norm() {
            return None;
        }
        scales.push(lambda);
    }
    Some((e, scales))
}

/// Distance from `p0` to `{p ≥ 0 : Σ wⱼpⱼ² ≤ s²}` and the projection.
fn project_factor(p0: &ControlVec, w: &ControlVec, s: f64) -> (f64, ControlVec) {
    let v0: f64 = (0..p0.len()).map(|j| w[j] * p0[j] * p0[j]).sum();
    if v0 <= s * s {
        return (0.0, *p0);
    }
    let in_support = |j: usize| w[j] > 0.0 && p0[j] > 0.0;
    let mut p = *p0;
    let count = (0..p0.len()).filter(|&j| in_support(j)).count();
    if s <= 0.0 {
        for j in (0..p0.len()).filter(|&j| in_support(j)) {
            p[j] = 0.0;
        }
    } else if count == 1 {
        let j = (0..p0.len()).find(|&j| in_support(j)).unwrap_or(0);
        p[j] = s / libm::sqrt(w[j]);
    } else {
        // pⱼ = p0ⱼ / (1 + ν wⱼ); Σ wⱼpⱼ² decreases in ν.
        let excess = |nu: f64| -> f64 {
            (0..p0.len()).filter(|&j| in_support(j)).map(|j| {
                let pj = p0[j] / (1.0 + nu * w[j]);
                w[j] * pj * pj
            }).sum::<f64>() - s * s
        };
        let spread: f64 = (0..p0.len()).filter(|&j| in_support(j)).map(|j| p0[j] * p0[j] / w[j]).sum();
        let mut hi = libm::sqrt(spread) / s;
        while excess(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for j in (0..p0.len()).filter(|&j| in_support(j)) {
            p[j] = p0[j] / (1.0 + hi * w[j]);
        }
    }
    (p.sub(p0).norm(), p)
}

struct Collinear<'a> {
    mean_proj: f64,
    inf_norm: f64,
    p0: &'a ControlVec,
    w: ControlVec,
    constraints: &'a [ConstraintCoeffs],
    scales: &'a [f64],
    params: &'a SafetyParams,
}

impl Collinear<'_> {
    /// Feasible interval `[L(s), U(s)]` for the mean gain `g = e·(μ − μ₀)`.
    fn interval(&self, s: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (c, &lambda) in self.constraints.iter().zip(self.scales) {
            let spread = match self.params.alpha_form {
                AlphaForm::Variance => self.params.alpha * lambda * lambda * s * s,
                AlphaForm::StdDev => self.params.alpha * lambda.abs() * s,
            };
            let bound = (c.b + spread) / lambda - self.mean_proj;
            if lambda > 0.0 {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        (lo, hi)
    }

    fn gain(&self, s: f64) -> Option<f64> {
        let (lo, hi) = self.interval(s);
        if lo > hi {
            None
        } else if lo > 0.0 {
            Some(lo)
        } else if hi < 0.0 {
            Some(hi)
        } else {
            Some(0.0)
        }
    }

    fn objective(&self, s: f64) -> f64 {
        match self.gain(s) {
            Some(g) => g.abs() / self.inf_norm + project_factor(self.p0, &self.w, s).0,
            None => f64::INFINITY,
        }
    }
}

fn solve_collinear(
    mu0: &ControlVec,
    p0: &ControlVec,
    dir: &ControlVec,
    constraints: &[ConstraintCoeffs],
    scales: &[f64],
    params: &SafetyParams,
) -> Option<(ControlVec, ControlVec)> {
    solve_collinear_with(mu0, p0, dir, constraints, scales, params, true)
}

fn solve_collinear_with(
    mu0: &ControlVec,
    p0: &ControlVec,
    dir: &ControlVec,
    constraints: &[ConstraintCoeffs],
    scales: &[f64],
    params: &SafetyParams,
    allow_exact: bool,
) -> Option<(ControlVec, ControlVec)> {
    let m = mu0.len();
    let w = ControlVec::from_fn(m, |j| dir[j] * dir[j]);
    // mean shifts go to the first coordinate with the largest |eⱼ|
    let mut pivot = 0;
    for j in 1..m {
        if dir[j].abs() > dir[pivot].abs() {
            pivot = j;
        }
    }
    let problem = Collinear {
        mean_proj: dir.dot(mu0),
        inf_norm: dir[pivot].abs(),
        p0,
        w,
        constraints,
        scales,
        params,
    };
    let s0 = libm::sqrt((0..m).map(|j| w[j] * p0[j] * p0[j]).sum::<f64>());

    if allow_exact && (0..m).filter(|&j| w[j] > 0.0).count() == 1 && constraints.len() <= SINGLE_AXIS_MAX {
        let s = single_axis_minimizer(&problem, s0)?;
        return Some(finish_collinear(&problem, mu0, p0, dir, pivot, s));
    }

    problem.gain(0.0)?;
    // L(s) − U(s) is nondecreasing in s, so feasible s form [0, s_hi].
    let mut s_hi = s0;
    if problem.gain(s0).is_none() {
        let (mut lo, mut hi) = (0.0, s0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-12 * (1.0 + s0) {
                break;
            }
            if problem.gain(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        s_hi = lo;
    }

    let s_star = golden_section(|s| problem.objective(s), 0.0, s_hi);
    let f_star = problem.objective(s_star);
    // Among (near-)ties prefer the smallest s: shrink Σ before moving μ.
    let tie = 1e-12 * (1.0 + f_star.abs());
    let (mut lo, mut hi) = (0.0, s_star);
    if problem.objective(0.0) <= f_star + tie {
        hi = 0.0;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-12 * (1.0 + s_star) {
                break;
            }
            if problem.objective(mid) <= f_star + tie {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    problem.gain(hi)?;
    Some(finish_collinear(&problem, mu0, p0, dir, pivot, hi))
}

fn finish_collinear(
    problem: &Collinear<'_>,
    mu0: &ControlVec,
    p0: &ControlVec,
    dir: &ControlVec,
    pivot: usize,
    s: f64,
) -> (ControlVec, ControlVec) {
    let g = problem.gain(s).unwrap_or(0.0);
    let (_, p) = project_factor(p0, &problem.w, s);
    let mut mean = *mu0;
    mean[pivot] += g / dir[pivot];
    (mean, p)
}

const SINGLE_AXIS_MAX: usize = 8;

/// Exact minimizer when `e` has one nonzero coordinate. Then the factor
/// distance is `(s₀ − s)₊/|eⱼ|` and `|g(s)| = max(0, maxₖ(aₖ·s^q + cₖ))`
/// with `q = 2` (variance) or `q = 1` (std-dev), so the objective is convex
/// and piecewise smooth; its minimum sits at an endpoint, a kink, or a
/// stationary point of one piece.
fn single_axis_minimizer(problem: &Collinear<'_>, s0: f64) -> Option<f64> {
    let params = problem.params;
    let q_is_two = matches!(params.alpha_form, AlphaForm::Variance);
    let root = |v: f64| if q_is_two { libm::sqrt(v) } else { v };
    // lower pieces L_k = a·s^q + c, upper pieces U_l = −a·s^q + u
    let piece = |c: &ConstraintCoeffs, lambda: f64| -> (f64, f64) {
        let slope = match params.alpha_form {
            AlphaForm::Variance => params.alpha * lambda.abs(),
            AlphaForm::StdDev => params.alpha,
        };
        (slope, c.b / lambda - problem.mean_proj)
    };

    // feasible s^q: every lower piece stays below every upper piece
    let mut cap = f64::INFINITY;
    for (ck, &lk) in problem.constraints.iter().zip(problem.scales) {
        if lk <= 0.0 {
            continue;
        }
        let (ak, c) = piece(ck, lk);
        for (cl, &ll) in problem.constraints.iter().zip(problem.scales) {
            if ll >= 0.0 {
                continue;
            }
            let (al, u) = piece(cl, ll);
            let room = u - c;
            if room < 0.0 {
                return None;
            }
            if ak + al > 0.0 {
                cap = cap.min(room / (ak + al));
            }
        }
    }
    let mut end = s0.min(root(cap));
    // the closed-form cap can sit an ulp past the feasible edge
    let mut nudge = 1e-15 * (1.0 + end);
    while end > 0.0 && problem.gain(end).is_none() {
        end = (end - nudge).max(0.0);
        nudge *= 2.0;
    }
    problem.gain(end)?;

    // |g| pieces as (slope, offset); −U_l = a·s^q − u
    let pieces = || {
        problem.constraints.iter().zip(problem.scales).map(|(c, &l)| {
            let (a, off) = piece(c, l);
            if l > 0.0 { (a, off) } else { (a, -off) }
        })
    };
    let mut best = (0.0, problem.objective(0.0));
    let mut consider = |s: f64| {
        if !(s > 0.0) || s > end {
            return;
        }
        let f = problem.objective(s);
        let tie = 1e-12 * (1.0 + best.1.abs());
        if f < best.1 - tie || (f <= best.1 + tie && s < best.0) {
            best = (s, f);
        }
    };
    consider(end);
    for (i, (a, c)) in pieces().enumerate() {
        if q_is_two && a > 0.0 {
            consider(1.0 / (2.0 * a));
        }
        if a > 0.0 && c < 0.0 {
            consider(root(-c / a));
        }
        for (a2, c2) in pieces().skip(i + 1) {
            if a != a2 {
                let v = (c2 - c) / (a - a2);
                if v > 0.0 {
                    consider(root(v));
                }
            }
        }
    }
    Some(best.0)
}

/// Minimizer of a convex function on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    if b <= a {
        return a;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-10 * (1.0 + b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints can beat the interior probes on a monotone objective
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best.0
}

// ---------------------------------------------------------------------------
// Interior point for general (non-collinear) constraint sets.

const IP_DIM: usize = 3 * MAX_CONTROL_DIM + 2;

/// Variable layout: `μ (m) | s (m) | p (m) | t | r?` where `s ≥ |μ − μ₀|`
/// linearizes the ℓ1 term, `t ≥ ‖p − p₀‖` is a second-order cone, and `r`
/// relaxes the chance constraints during phase I.
struct Barrier<'a> {
    m: usize,
    mu0: &'a ControlVec,
    p0: &'a ControlVec,
    constraints: &'a [ConstraintCoeffs],
    params: &'a SafetyParams,
    phase_one: bool,
}

impl Barrier<'_> {
    fn dim(&self) -> usize {
        3 * self.m + 1 + usize::from(self.phase_one)
    }

    fn t_idx(&self) -> usize {
        3 * self.m
    }

    fn r_idx(&self) -> usize {
        3 * self.m + 1
    }

    fn cost_vector(&self) -> [f64; IP_DIM] {
        let mut c = [0.0; IP_DIM];
        let weight = if self.phase_one { 1e-3 } else { 1.0 };
        for j in 0..self.m {
            c[self.m + j] = weight;
        }
        c[self.t_idx()] = weight;
        if self.phase_one {
            c[self.r_idx()] = 1.0;
        }
        c
    }

    /// `Σ −log gᵢ(z)` with gradient and Hessian; `None` outside the domain.
    #[allow(clippy::type_complexity)]
    fn evaluate(&self, z: &[f64; IP_DIM]) -> Option<(f64, [f64; IP_DIM], [[f64; IP_DIM]; IP_DIM])> {
        let m = self.m;
        let n = self.dim();
        let mut val = 0.0;
        let mut grad = [0.0; IP_DIM];
        let mut hess = [[0.0; IP_DIM]; IP_DIM];

        // −log(g) for g = Σ coeffᵢ zᵢ + k; gradient of g is sparse.
        let linear = |terms: &[(usize, f64)], g: f64, val: &mut f64, grad: &mut [f64; IP_DIM], hess: &mut [[f64; IP_DIM]; IP_DIM]| -> bool {
            if !(g > 0.0) {
                return false;
            }
            *val -= libm::log(g);
            for &(i, ci) in terms {
                grad[i] -= ci / g;
                for &(j, cj) in terms {
                    hess[i][j] += ci * cj / (g * g);
                }
            }
            true
        };

        for j in 0..m {
            let d = z[j] - self.mu0[j];
            let s = z[m + j];
            if !linear(&[(m + j, 1.0), (j, -1.0)], s - d, &mut val, &mut grad, &mut hess)
                || !linear(&[(m + j, 1.0), (j, 1.0)], s + d, &mut val, &mut grad, &mut hess)
                || !linear(&[(2 * m + j, 1.0)], z[2 * m + j], &mut val, &mut grad, &mut hess)
            {
                return None;
            }
        }

        // −log(f) for a quadratic f with dense gradient/Hessian.
        let quad = |f: f64, df: &[f64; IP_DIM], d2f: &[[f64; IP_DIM]; IP_DIM], val: &mut f64, grad: &mut [f64; IP_DIM], hess: &mut [[f64; IP_DIM]; IP_DIM]| -> bool {
            if !(f > 0.0) {
                return false;
            }
            *val -= libm::log(f);
            for i in 0..n {
                grad[i] -= df[i] / f;
                for j in 0..n {
                    hess[i][j] += -d2f[i][j] / f + df[i] * df[j] / (f * f);
                }
            }
            true
        };

        // t² − ‖p − p₀‖², t > 0
        let t = z[self.t_idx()];
        if !(t > 0.0) {
            return None;
        }
        let mut df = [0.0; IP_DIM];
        let mut d2f = [[0.0; IP_DIM]; IP_DIM];
        let mut f = t * t;
        df[self.t_idx()] = 2.0 * t;
        d2f[self.t_idx()][self.t_idx()] = 2.0;
        for j in 0..m {
            let dp = z[2 * m + j] - self.p0[j];
            f -= dp * dp;
            df[2 * m + j] = -2.0 * dp;
            d2f[2 * m + j][2 * m + j] = -2.0;
        }
        if !quad(f, &df, &d2f, &mut val, &mut grad, &mut hess) {
            return None;
        }

        let alpha = self.params.alpha;
        for c in self.constraints {
            let mut df = [0.0; IP_DIM];
            let mut d2f = [[0.0; IP_DIM]; IP_DIM];
            let relax = if self.phase_one { z[self.r_idx()] } else { 0.0 };
            let margin = c.a.dot(&ControlVec::new(&z[..m])) - c.b + relax;
            let ok = match self.params.alpha_form {
                AlphaForm::Variance => {
                    let mut g = margin;
                    for j in 0..m {
                        let a2 = c.a[j] * c.a[j];
                        let pj = z[2 * m + j];
                        g -= alpha * a2 * pj * pj;
                        df[j] = c.a[j];
                        df[2 * m + j] = -2.0 * alpha * a2 * pj;
                        d2f[2 * m + j][2 * m + j] = -2.0 * alpha * a2;
                    }
                    if self.phase_one {
                        df[self.r_idx()] = 1.0;
                    }
                    quad(g, &df, &d2f, &mut val, &mut grad, &mut hess)
                }
                AlphaForm::StdDev if alpha == 0.0 => {
                    for j in 0..m {
                        df[j] = c.a[j];
                    }
                    if self.phase_one {
                        df[self.r_idx()] = 1.0;
                    }
                    quad(margin, &df, &d2f, &mut val, &mut grad, &mut hess)
                }
                AlphaForm::StdDev => {
                    // u² − Σ aⱼ²pⱼ² with u = margin/α > 0
                    let u = margin / alpha;
                    if !(u > 0.0) {
                        return None;
                    }
                    let mut f = u * u;
                    let mut du = [0.0; IP_DIM];
                    for j in 0..m {
                        du[j] = c.a[j] / alpha;
                    }
                    if self.phase_one {
                        du[self.r_idx()] = 1.0 / alpha;
                    }
                    for i in 0..n {
                        df[i] = 2.0 * u * du[i];
                        for j in 0..n {
                            d2f[i][j] = 2.0 * du[i] * du[j];
                        }
                    }
                    for j in 0..m {
                        let a2 = c.a[j] * c.a[j];
                        let pj = z[2 * m + j];
                        f -= a2 * pj * pj;
                        df[2 * m + j] = -2.0 * a2 * pj;
                        d2f[2 * m + j][2 * m + j] = -2.0 * a2;
                    }
                    quad(f, &df, &d2f, &mut val, &mut grad, &mut hess)
                }
            };
            if !ok {
                return None;
            }
        }
        Some((val, grad, hess))
    }

    fn barrier_count(&self) -> f64 {
        (3 * self.m + 1 + self.constraints.len()) as f64
    }

    /// Barrier method from a strictly feasible `z`. In phase I it returns
    /// as soon as `r < 0`.
    fn minimize(&self, z: &mut [f64; IP_DIM], gap_tol: f64) -> bool {
        let n = self.dim();
        let c = self.cost_vector();
        let mut tau = 1.0;
        for _outer in 0..40 {
            for _newton in 0..100 {
                let Some((bval, bgrad, bhess)) = self.evaluate(z) else {
                    return false;
                };
                let phi = tau * dot(&c, z, n) + bval;
                let mut g = [0.0; IP_DIM];
                for i in 0..n {
                    g[i] = tau * c[i] + bgrad[i];
                }
                let mut h = bhess;
                let mut step = g;
                for v in step.iter_mut() {
                    *v = -*v;
                }
                if !solve_dense(&mut h, &mut step, n) {
                    return false;
                }
                let decrement = -dot(&g, &step, n);
                if decrement / 2.0 <= 1e-12 {
                    break;
                }
                let mut size = 1.0;
                let mut accepted = false;
                for _ in 0..80 {
                    let mut trial = *z;
                    for i in 0..n {
                        trial[i] += size * step[i];
                    }
                    if let Some((tval, _, _)) = self.evaluate(&trial) {
                        let tphi = tau * dot(&c, &trial, n) + tval;
                        if tphi <= phi - 0.25 * size * decrement {
                            *z = trial;
                            accepted = true;
                            break;
                        }
                    }
                    size *= 0.5;
                }
                if !accepted {
                    break;
                }
                if self.phase_one && z[self.r_idx()] < 0.0 {
                    return true;
                }
            }
            if self.barrier_count() / tau < gap_tol {
                break;
            }
            tau *= 20.0;
        }
        !self.phase_one
    }
}

fn dot(a: &[f64; IP_DIM], b: &[f64; IP_DIM], n: usize) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

fn interior_point(
    mu0: &ControlVec,
    p0: &ControlVec,
    constraints: &[ConstraintCoeffs],
    params: &SafetyParams,
    tol: f64,
) -> Option<(ControlVec, ControlVec)> {
    let m = mu0.len();
    let mut phase_one = Barrier { m, mu0, p0, constraints, params, phase_one: true };

    let mut z = [0.0; IP_DIM];
    z[..m].copy_from_slice(mu0.as_slice());
    let mut dp2 = 0.0;
    for j in 0..m {
        z[m + j] = 1.0;
        z[2 * m + j] = 0.5 * p0[j] + 1e-3;
        dp2 += (z[2 * m + j] - p0[j]) * (z[2 * m + j] - p0[j]);
    }
    z[3 * m] = libm::sqrt(dp2) + 1.0;
    let start = GaussianDist::new(*mu0, ControlMatrix::diagonal(&z[2 * m..3 * m]));
    let worst = constraints
        .iter()
        .map(|c| -constraint_slack(&start, c, params))
        .fold(0.0, f64::max);
    let scale = match params.alpha_form {
        AlphaForm::StdDev if params.alpha > 0.0 => params.alpha,
        _ => 1.0,
    };
    z[3 * m + 1] = worst + scale;

    if !phase_one.minimize(&mut z, 1e-10) {
        return None;
    }
    phase_one.phase_one = false;
    let phase_two = phase_one;
    z[3 * m + 1] = 0.0;
    phase_two.minimize(&mut z, tol.min(1e-8));

    let mean = ControlVec::new(&z[..m]);
    let p = ControlVec::from_fn(m, |j| z[2 * m + j].max(0.0));
    Some((mean, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cv(v: &[f64]) -> ControlVec {
        ControlVec::new(v)
    }

    fn coeffs(a: &[f64], b: f64) -> ConstraintCoeffs {
        ConstraintCoeffs { a: cv(a), b }
    }

    fn unit(m: usize) -> GaussianDist {
        GaussianDist::diagonal(ControlVec::zeros(m), &cv(&[1.0; 4][..m]))
    }

    fn params(form: AlphaForm) -> SafetyParams {
        SafetyParams { delta: 0.003, alpha: 2.748, alpha_form: form }
    }

    #[test]
    fn satisfied_examples() {
        let p = params(AlphaForm::Variance);
        assert!(constraint_satisfied(&unit(2), &coeffs(&[1.0, 0.0], -10.0), &p));
        assert!(!constraint_satisfied(&unit(2), &coeffs(&[1.0, 0.0], 0.0), &p));
        let p0 = SafetyParams { alpha: 0.0, ..p };
        let d = GaussianDist::diagonal(cv(&[0.5, 0.0]), &cv(&[3.0, 3.0]));
        assert!(constraint_satisfied(&d, &coeffs(&[1.0, 0.0], 0.5), &p0));
        assert!(!constraint_satisfied(&d, &coeffs(&[1.0, 0.0], 0.6), &p0));
    }

    #[test]
    fn lmi_degenerate_cases() {
        let p = params(AlphaForm::Variance);
        let zero_factor = GaussianDist::new(cv(&[0.3, -0.2]), ControlMatrix::zeros(2, 2));
        assert!(lmi_feasible(&zero_factor, &coeffs(&[1.0, 1.0], 0.1), &p));
        assert!(!lmi_feasible(&zero_factor, &coeffs(&[1.0, 1.0], 0.2), &p));
        let p0 = SafetyParams { alpha: 0.0, ..p };
        assert!(lmi_feasible(&unit(2), &coeffs(&[1.0, 0.0], 0.0), &p0));
        assert!(!lmi_feasible(&unit(2), &coeffs(&[1.0, 0.0], 0.1), &p0));
    }

    #[test]
    fn variance_cap_examples() {
        let p = SafetyParams { alpha: 2.0, ..params(AlphaForm::Variance) };
        assert_eq!(variance_cap(&coeffs(&[1.0, 0.0], 0.0), &cv(&[1.0, 0.0]), &p), Some(0.5));
        assert_eq!(variance_cap(&coeffs(&[1.0, 0.0], 1.0), &cv(&[1.0, 0.0]), &p), Some(0.0));
        assert_eq!(variance_cap(&coeffs(&[1.0, 0.0], 2.0), &cv(&[1.0, 0.0]), &p), None);
    }

    #[test]
    fn inactive_is_unchanged() {
        let prob = ShaperProblem::new(unit(2), vec![coeffs(&[1.0, 0.0], -10.0)], params(AlphaForm::Variance));
        let sol = shape(&prob).unwrap();
        assert_eq!(sol.status, ShaperStatus::Unchanged);
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.shaped, unit(2));
    }

    #[test]
    fn analytic_single_constraint() {
        let alpha = 2.748;
        let prob = ShaperProblem::new(unit(2), vec![coeffs(&[1.0, 0.0], 0.0)], params(AlphaForm::Variance));
        let sol = shape(&prob).unwrap();
        assert_eq!(sol.status, ShaperStatus::Shaped);
        assert!((sol.objective - (1.0 - 1.0 / (4.0 * alpha))).abs() < 1e-9);
        // P₁₁ shrinks by 1 − 1/(2α) to 1/(2α); μ₁ = α·P₁₁²
        assert!((sol.shaped.factor[(0, 0)] - 1.0 / (2.0 * alpha)).abs() < 1e-6);
        assert!((sol.shaped.mean[0] - 1.0 / (4.0 * alpha)).abs() < 1e-6);
        assert_eq!(sol.shaped.factor[(1, 1)], 1.0);
        assert_eq!(sol.shaped.mean[1], 0.0);
    }

    #[test]
    fn zero_normal_with_positive_b_is_infeasible() {
        let prob = ShaperProblem::new(unit(2), vec![coeffs(&[0.0, 0.0], 1.0)], params(AlphaForm::Variance));
        let sol = shape(&prob).unwrap();
        assert_eq!(sol.status, ShaperStatus::Infeasible);
        assert_eq!(sol.shaped, unit(2));
    }

    #[test]
    fn contract_violations() {
        let p = params(AlphaForm::Variance);
        let full = GaussianDist::new(ControlVec::zeros(2), ControlMatrix::from_rows(&[&[1.0, 0.2], &[0.0, 1.0]]));
        assert!(shape(&ShaperProblem::new(full, vec![coeffs(&[1.0, 0.0], 0.0)], p)).is_err());
        assert!(shape(&ShaperProblem::new(unit(2), vec![], p)).is_err());
        assert!(shape(&ShaperProblem::new(unit(2), vec![coeffs(&[1.0], 0.0)], p)).is_err());
        let mut bad_tol = ShaperProblem::new(unit(2), vec![coeffs(&[1.0, 0.0], 0.0)], p);
        bad_tol.tolerance = 0.0;
        assert!(shape(&bad_tol).is_err());
    }

    #[test]
    fn passage_walls_jointly() {
        // A₂ = −A₁, both violated by a wide nominal.
        let p = params(AlphaForm::Variance);
        let prob = ShaperProblem::new(
            unit(2),
            vec![coeffs(&[-1.2, 0.0], -0.4), coeffs(&[1.2, 0.0], -0.6)],
            p,
        );
        let sol = shape(&prob).unwrap();
        assert_eq!(sol.status, ShaperStatus::Shaped);
        for c in &prob.constraints {
            assert!(constraint_slack(&sol.shaped, c, &p) >= -1e-9);
        }
        assert_eq!(sol.shaped.factor[(1, 1)], 1.0);
    }

    #[test]
    fn conflicting_walls_are_infeasible() {
        let p = params(AlphaForm::Variance);
        let prob = ShaperProblem::new(unit(2), vec![coeffs(&[1.0, 0.0], 1.0), coeffs(&[-1.0, 0.0], 0.0)], p);
        assert_eq!(shape(&prob).unwrap().status, ShaperStatus::Infeasible);
    }

    #[test]
    fn single_axis_closed_form_matches_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut solved = 0;
        for case in 0..2000 {
            let form = if case % 2 == 0 { AlphaForm::Variance } else { AlphaForm::StdDev };
            let p = params(form);
            let mu0 = cv(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let p0 = cv(&[rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)]);
            let e = rng.random_range(-2.0..2.0);
            let n = rng.random_range(1..4);
            let cs: vec::Vec<_> = (0..n)
                .map(|_| {
                    let lambda: f64 = rng.random_range(-1.5..1.5);
                    coeffs(&[lambda * e, 0.0], rng.random_range(-1.0..1.0))
                })
                .collect();
            let Some((dir, scales)) = collinear_direction(&cs) else { continue };
            let exact = solve_collinear_with(&mu0, &p0, &dir, &cs, &scales, &p, true);
            let search = solve_collinear_with(&mu0, &p0, &dir, &cs, &scales, &p, false);
            let nominal = GaussianDist::diagonal(mu0, &p0);
            match (exact, search) {
                (Some((m1, f1)), Some((m2, f2))) => {
                    let d1 = GaussianDist::diagonal(m1, &f1);
                    let o1 = shaping_objective(&nominal, &d1);
                    let o2 = shaping_objective(&nominal, &GaussianDist::diagonal(m2, &f2));
                    assert!((o1 - o2).abs() < 1e-7, "case {case}: {o1} vs {o2}");
                    for c in &cs {
                        assert!(constraint_slack(&d1, c, &p) > -1e-9, "case {case}");
                    }
                    solved += 1;
                }
                (None, None) => {}
                (a, b) => panic!("case {case}: exact {a:?} vs search {b:?}"),
            }
        }
        assert!(solved > 500, "{solved}");
    }

    #[test]
    fn interior_point_matches_collinear_solver() {
        for form in [AlphaForm::Variance, AlphaForm::StdDev] {
            let p = params(form);
            let mu0 = cv(&[0.1, -0.3]);
            let p0 = cv(&[0.8, 1.3]);
            let cs = [coeffs(&[1.0, 0.5], 0.4)];
            let (dir, scales) = collinear_direction(&cs).unwrap();
            let (m1, f1) = solve_collinear(&mu0, &p0, &dir, &cs, &scales, &p).unwrap();
            let (m2, f2) = interior_point(&mu0, &p0, &cs, &p, 1e-10).unwrap();
            let nominal = GaussianDist::diagonal(mu0, &p0);
            let o1 = shaping_objective(&nominal, &GaussianDist::diagonal(m1, &f1));
            let o2 = shaping_objective(&nominal, &GaussianDist::diagonal(m2, &f2));
            assert!((o1 - o2).abs() < 1e-6, "{form:?}: {o1} vs {o2}");
        }
    }

    #[test]
    fn non_collinear_constraints() {
        let p = params(AlphaForm::StdDev);
        let prob = ShaperProblem::new(
            unit(2),
            vec![coeffs(&[1.0, 0.5], 0.2), coeffs(&[-0.3, 1.0], 0.1)],
            p,
        );
        let sol = shape(&prob).unwrap();
        assert_eq!(sol.status, ShaperStatus::Shaped);
        for c in &prob.constraints {
            assert!(constraint_slack(&sol.shaped, c, &p) >= -1e-9);
        }
        let conflicting = ShaperProblem::new(
            unit(2),
            vec![coeffs(&[1.0, 0.0], 1.0), coeffs(&[-1.0, 0.0], 0.0), coeffs(&[0.0, 1.0], 0.5)],
            p,
        );
        assert_eq!(shape(&conflicting).unwrap().status, ShaperStatus::Infeasible);
    }

    #[test]
    fn multi_axis_projection() {
        let p0 = cv(&[1.0, 2.0]);
        let w = cv(&[1.0, 0.25]);
        let (d, p) = project_factor(&p0, &w, 0.5);
        let v: f64 = (0..2).map(|j| w[j] * p[j] * p[j]).sum();
        assert!((v - 0.25).abs() < 1e-10);
        assert!((p.sub(&p0).norm() - d).abs() < 1e-15);
    }
}
