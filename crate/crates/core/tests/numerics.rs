use proptest::prelude::*;

use scbf_mppi_core::barrier::{
    constraint_coeffs, double_integrator_wall, finite_difference_gradient, finite_difference_hessian, narrow_passage,
    scbf_margin,
};
use scbf_mppi_core::dynamics::{em_step, rollout};
use scbf_mppi_core::mppi::compute_weights;
use scbf_mppi_core::rng::{standard_normal, substream};
use scbf_mppi_core::{ControlVec, DoubleIntegrator, StateVec, Unicycle};

#[test]
fn euler_maruyama_increment_moments() {
    let model = Unicycle { sigma_scale: 1.0 };
    let dt = 0.05;
    let n = 100_000;
    let x0 = StateVec::new(&[0.3, -0.2, 0.7]);
    let u = ControlVec::zeros(2);
    let mut rng = substream(1, 0, 0);
    let mut sum = [0.0; 3];
    let mut sum_sq = [0.0; 3];
    for _ in 0..n {
        let noise: StateVec = standard_normal(&mut rng, 3);
        let x = em_step(&model, &x0, &u, dt, &noise).unwrap();
        for i in 0..3 {
            let d = x[i] - x0[i];
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    for i in 0..3 {
        let mean = sum[i] / n as f64;
        let var = sum_sq[i] / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt(), "axis {i}: mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "axis {i}: var {var}");
    }
}

#[test]
fn multi_step_diffusion_variance() {
    // k steps of pure diffusion with σ = c·I accumulate variance c²·k·dt
    let model = DoubleIntegrator { sigma_scale: 0.6 };
    let (dt, k, n) = (0.05, 8, 20_000);
    let x0 = StateVec::new(&[0.0, 0.0]);
    let zero = vec![ControlVec::zeros(1); k];
    let mut rng = substream(2, 0, 0);
    let velocities: Vec<f64> =
        (0..n).map(|_| rollout(&model, &x0, &zero, &zero, dt, &mut rng).unwrap().final_state()[1]).collect();
    let mean = velocities.iter().sum::<f64>() / n as f64;
    let var = velocities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = 0.36 * k as f64 * dt;
    let band = 3.0 * expected * (2.0 / (n - 1) as f64).sqrt();
    assert!((var - expected).abs() < band, "{var} vs {expected} ± {band}");
}

#[test]
fn straight_line_integration() {
    let model = Unicycle { sigma_scale: 0.0 };
    let controls = vec![ControlVec::new(&[1.0, 0.0]); 20];
    let zero = vec![ControlVec::zeros(2); 20];
    let traj = rollout(&model, &StateVec::zeros(3), &controls, &zero, 0.05, &mut substream(0, 0, 0)).unwrap();
    let end = traj.final_state();
    assert!((end[0] - 1.0).abs() < 1e-12);
    assert_eq!(end[1], 0.0);
    assert_eq!(end[2], 0.0);
    assert_eq!(traj.states.len(), 21);
}

#[test]
fn time_step_halving_is_consistent() {
    let model = Unicycle { sigma_scale: 0.0 };
    let x0 = StateVec::new(&[0.0, 0.0, 0.3]);
    let u = ControlVec::new(&[1.2, 0.8]);
    let noise = StateVec::zeros(3);
    let dt = 0.01;
    let one = em_step(&model, &x0, &u, 2.0 * dt, &noise).unwrap();
    let half = em_step(&model, &x0, &u, dt, &noise).unwrap();
    let two = em_step(&model, &half, &u, dt, &noise).unwrap();
    assert!(one.sub(&two).norm() < 10.0 * dt * dt);
}

fn arb_point() -> impl Strategy<Value = StateVec> {
    prop::collection::vec(-4.0..4.0f64, 3).prop_map(|v| StateVec::new(&v))
}

proptest! {
    #[test]
    fn barrier_derivatives_match_finite_differences(
        x in arb_point(),
        width in 0.5..2.0f64,
        freq in 0.5..2.0f64,
    ) {
        for bf in narrow_passage(width, freq, 3) {
            let g = bf.gradient(&x);
            let fd = finite_difference_gradient(|p| bf.value(p), &x, 1e-5);
            prop_assert!(g.sub(&fd).norm() <= 1e-4 * g.norm().max(1.0));
            let h = bf.hessian(&x);
            let fdh = finite_difference_hessian(|p| bf.gradient(p), &x, 1e-5);
            prop_assert!(h.sub(&fdh).frobenius_norm() <= 1e-3 * h.frobenius_norm().max(1.0));
        }
        let wall = double_integrator_wall();
        let p = StateVec::new(&[x[0], x[1]]);
        let fd = finite_difference_gradient(|q| wall.value(q), &p, 1e-5);
        prop_assert!(wall.gradient(&p).sub(&fd).norm() <= 1e-8);
    }

    #[test]
    fn constraint_coeffs_reproduce_margin(
        x in arb_point(),
        u in prop::collection::vec(-3.0..3.0f64, 2),
        scale in 0.0..1.5f64,
    ) {
        let model = Unicycle { sigma_scale: scale };
        let u = ControlVec::new(&u);
        for bf in narrow_passage(1.0, std::f64::consts::FRAC_PI_2, 3) {
            let c = constraint_coeffs(&model, &bf, &x).unwrap();
            let margin = scbf_margin(&model, &bf, &x, &u).unwrap();
            prop_assert!((c.a.dot(&u) - c.b - margin).abs() < 1e-12);
            prop_assert_eq!(c.a[1], 0.0);
            let shifted = c.shifted_by(&u);
            prop_assert!((shifted.a.dot(&ControlVec::zeros(2)) - shifted.b - margin).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_are_normalized_and_shift_invariant(
        costs in prop::collection::vec(0.0..200.0f64, 1..100),
        shift in -1e3..1e3f64,
        lambda in 0.1..10.0f64,
    ) {
        let w = compute_weights(&costs, lambda).unwrap();
        let total: f64 = w.weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(w.weights.iter().all(|&v| v.is_finite() && v >= 0.0));
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let ws = compute_weights(&shifted, lambda).unwrap();
        for (a, b) in w.weights.iter().zip(&ws.weights) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let top = w.weights.iter().copied().fold(0.0, f64::max);
        let argmin = costs.iter().position(|&c| c == best).unwrap();
        prop_assert_eq!(w.weights[argmin], top);
    }
}
