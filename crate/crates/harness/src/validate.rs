//! Self-checks that need no experiment config.

use rand::Rng;

use scbf_mppi_core::barrier::{
    finite_difference_gradient, finite_difference_hessian, narrow_passage, double_integrator_wall,
};
use scbf_mppi_core::complexity::{lemma1_check, n1_bound};
use scbf_mppi_core::dynamics::em_step;
use scbf_mppi_core::mppi::compute_weights;
use scbf_mppi_core::rng::{standard_normal, substream, StreamRng};
use scbf_mppi_core::shaper::{
    constraint_satisfied, constraint_slack, lmi_feasible, shape, ShaperProblem, ShaperStatus,
};
use scbf_mppi_core::{
    AlphaForm, ConstraintCoeffs, ControlMatrix, ControlVec, GaussianDist, SafetyParams, StateVec, Unicycle,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_vec(rng: &mut StreamRng, m: usize, lo: f64, hi: f64) -> ControlVec {
    ControlVec::from_fn(m, |_| uniform(rng, lo, hi))
}

fn sample_size_bounds() -> Check {
    let a = n1_bound(0.05, 0.05).unwrap_or(0);
    let b = n1_bound(0.1, 0.05).unwrap_or(0);
    check("hoeffding sample size", a == 1476 && b == 369, format!("N1(0.05,0.05)={a}, N1(0.1,0.05)={b}"))
}

fn schur_equivalence(seed: u64) -> Check {
    let mut rng = substream(seed, 1, 0);
    let mut disagreements = 0;
    let n = 10_000;
    for _ in 0..n {
        let m = rng.random_range(1..=4);
        let mut factor = ControlMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                factor[(i, j)] = uniform(&mut rng, -1.0, 1.0);
            }
        }
        let dist = GaussianDist::new(random_vec(&mut rng, m, -2.0, 2.0), factor);
        let c = ConstraintCoeffs { a: random_vec(&mut rng, m, -2.0, 2.0), b: uniform(&mut rng, -3.0, 3.0) };
        let params = SafetyParams { delta: 0.003, alpha: uniform(&mut rng, 0.0, 4.0), alpha_form: AlphaForm::Variance };
        if lmi_feasible(&dist, &c, &params) != constraint_satisfied(&dist, &c, &params) {
            disagreements += 1;
        }
    }
    check("schur complement equivalence", disagreements == 0, format!("{disagreements} disagreements in {n}"))
}

fn weight_shift_invariance(seed: u64) -> Check {
    let mut rng = substream(seed, 2, 0);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let costs: Vec<f64> = (0..50).map(|_| uniform(&mut rng, 0.0, 30.0)).collect();
        let shift = uniform(&mut rng, -1e3, 1e3);
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let (Ok(a), Ok(b)) = (compute_weights(&costs, 1.0), compute_weights(&shifted, 1.0)) else {
            return check("weight baseline invariance", false, "weights failed".into());
        };
        for (x, y) in a.weights.iter().zip(&b.weights) {
            worst = worst.max((x - y).abs());
        }
    }
    check("weight baseline invariance", worst <= 1e-12, format!("max deviation {worst:.3e}"))
}

fn shaper_properties(seed: u64) -> Check {
    let mut rng = substream(seed, 3, 0);
    let mut failures = Vec::new();
    for i in 0..200 {
        let m = rng.random_range(1..=4);
        let std = random_vec(&mut rng, m, 0.1, 2.0);
        let nominal = GaussianDist::diagonal(random_vec(&mut rng, m, -1.0, 1.0), &std);
        let a = random_vec(&mut rng, m, -2.0, 2.0);
        let c = ConstraintCoeffs { a, b: uniform(&mut rng, -1.0, 2.0) };
        let form = if i % 2 == 0 { AlphaForm::Variance } else { AlphaForm::StdDev };
        let params = SafetyParams { delta: 0.003, alpha: 2.7477813854449926, alpha_form: form };
        let problem = ShaperProblem::new(nominal, vec![c], params);
        let Ok(sol) = shape(&problem) else {
            failures.push(format!("case {i}: error"));
            continue;
        };
        if sol.status == ShaperStatus::Infeasible {
            continue;
        }
        if constraint_slack(&sol.shaped, &c, &params) < -1e-7 {
            failures.push(format!("case {i}: infeasible output"));
        }
        if sol.shaped.projected_variance(&a) > nominal.projected_variance(&a) + 1e-9 {
            failures.push(format!("case {i}: variance grew"));
        }
        let again = shape(&ShaperProblem::new(sol.shaped, vec![c], params));
        if !matches!(again, Ok(s) if s.status == ShaperStatus::Unchanged) {
            failures.push(format!("case {i}: not idempotent"));
        }
    }
    check("shaper feasibility, shrink-only, idempotence", failures.is_empty(), failures.join("; "))
}

fn diffusion_moments(seed: u64) -> Check {
    let model = Unicycle { sigma_scale: 0.7 };
    let n = 100_000;
    let dt = 0.05;
    let x0 = StateVec::new(&[0.0, 0.0, 0.0]);
    let u = ControlVec::zeros(2);
    let mut rng = substream(seed, 4, 0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let noise: StateVec = standard_normal(&mut rng, 3);
        let Ok(x) = em_step(&model, &x0, &u, dt, &noise) else {
            return check("euler-maruyama moments", false, "step failed".into());
        };
        sum += x[1];
        sum_sq += x[1] * x[1];
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    let expected = 0.49 * dt;
    let ok = mean.abs() <= 0.05 * expected.sqrt() && (var / expected - 1.0).abs() <= 0.05;
    check("euler-maruyama moments", ok, format!("mean {mean:.2e}, var {var:.5} vs {expected:.5}"))
}

fn barrier_derivatives(seed: u64) -> Check {
    let mut rng = substream(seed, 5, 0);
    let mut barriers = narrow_passage(1.0, std::f64::consts::FRAC_PI_2, 3).to_vec();
    barriers.extend(narrow_passage(0.8, 1.0, 3));
    let wall = double_integrator_wall();
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    for _ in 0..100 {
        for bf in barriers.iter().chain(std::iter::once(&wall)) {
            let n = bf.state_dim();
            let x = StateVec::from_fn(n, |_| uniform(&mut rng, -3.0, 3.0));
            let g = bf.gradient(&x);
            let fd = finite_difference_gradient(|p| bf.value(p), &x, 1e-5);
            worst_g = worst_g.max(g.sub(&fd).norm() / g.norm().max(1.0));
            let h = bf.hessian(&x);
            let fdh = finite_difference_hessian(|p| bf.gradient(p), &x, 1e-5);
            worst_h = worst_h.max(h.sub(&fdh).frobenius_norm() / h.frobenius_norm().max(1.0));
        }
    }
    check(
        "barrier derivatives vs finite differences",
        worst_g <= 1e-4 && worst_h <= 1e-3,
        format!("gradient {worst_g:.2e}, hessian {worst_h:.2e}"),
    )
}

fn product_variance(seed: u64) -> Check {
    let mut rng = substream(seed, 6, 0);
    let n = 100_000;
    let mut failures = 0;
    for _ in 0..10 {
        let (lo, hi) = (uniform(&mut rng, -2.0, 1.0), uniform(&mut rng, 1.0, 3.0));
        let half = uniform(&mut rng, 0.1, 2.0);
        let x: Vec<f64> = (0..n).map(|_| uniform(&mut rng, lo, hi)).collect();
        let y: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -half, half)).collect();
        failures += usize::from(!lemma1_check(&x, &y));
    }
    check("product variance bound", failures == 0, format!("{failures} failures in 10 pairs"))
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        sample_size_bounds(),
        schur_equivalence(seed),
        weight_shift_invariance(seed),
        shaper_properties(seed),
        diffusion_moments(seed),
        barrier_derivatives(seed),
        product_variance(seed),
    ]
}
