use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use scbf_mppi_core::barrier::narrow_passage;
use scbf_mppi_core::complexity::estimate_var_du;
use scbf_mppi_core::cost::trajectory_cost;
use scbf_mppi_core::mppi::{
    compute_weights, evaluate_batch, shift_horizon, update_schedule, ControlSchedule, SampleShaping,
};
use scbf_mppi_core::{Controller, ControlVec, CostSpec, MppiConfig, SamplingMode, StateVec, Unicycle};

fn passage_setup(mode: SamplingMode, samples: usize) -> (Unicycle, CostSpec, MppiConfig) {
    let mut config = MppiConfig::new(2);
    config.mode = mode;
    config.samples = samples;
    config.seed = 42;
    (Unicycle { sigma_scale: 0.05 }, CostSpec::new([4.0, 0.5], 2), config)
}

#[test]
fn scbf_perturbations_never_exceed_nominal_variance() {
    let barriers = narrow_passage(1.0, FRAC_PI_2, 3).to_vec();
    for (x, theta) in [(0.0, 0.0), (0.5, 0.6), (1.7, -0.8), (3.2, 0.3)] {
        let (model, cost, config) = passage_setup(SamplingMode::Scbf, 200);
        let y = (FRAC_PI_2 * x).sin() + 0.3;
        let x0 = StateVec::new(&[x, y, theta]);
        let schedule = ControlSchedule::constant(config.horizon, ControlVec::new(&[0.5, 0.0]));
        let batch = evaluate_batch(&model, &cost, &barriers, &schedule, &config, &x0, 0).unwrap();
        let draws: Vec<ControlVec> = batch.perturbations().copied().collect();
        let var = estimate_var_du(&draws).unwrap();
        let kt = (config.samples * config.horizon) as f64;
        for j in 0..2 {
            let s0 = config.nominal_sigma[j].powi(2);
            assert!(var[j] <= s0 + 3.0 * (2.0 / kt).sqrt() * s0, "state {x0:?}, dim {j}: {}", var[j]);
        }
        assert!(batch.count(SampleShaping::Shaped) > 0);
        assert_eq!(batch.count(SampleShaping::Flagged), 0);
    }
}

#[test]
fn batches_are_reproducible_per_seed() {
    let barriers = narrow_passage(1.0, FRAC_PI_2, 3).to_vec();
    let x0 = StateVec::new(&[0.0, 0.5, 0.0]);
    for mode in [SamplingMode::Plain, SamplingMode::Scbf] {
        let (model, cost, config) = passage_setup(mode, 64);
        let schedule = ControlSchedule::constant(config.horizon, ControlVec::zeros(2));
        let a = evaluate_batch(&model, &cost, &barriers, &schedule, &config, &x0, 3).unwrap();
        let b = evaluate_batch(&model, &cost, &barriers, &schedule, &config, &x0, 3).unwrap();
        assert_eq!(a, b);
        let c = evaluate_batch(&model, &cost, &barriers, &schedule, &config, &x0, 4).unwrap();
        assert_ne!(a.costs, c.costs);
        // a larger batch extends a smaller one with the same seed
        let mut wide = config.clone();
        wide.samples = 128;
        let d = evaluate_batch(&model, &cost, &barriers, &schedule, &wide, &x0, 3).unwrap();
        assert_eq!(&d.costs[..64], &a.costs[..]);
    }
}

#[test]
fn zero_spread_plain_sampling_is_deterministic() {
    let barriers = narrow_passage(1.0, FRAC_PI_2, 3).to_vec();
    let (_, cost, mut config) = passage_setup(SamplingMode::Plain, 1);
    let model = Unicycle { sigma_scale: 0.0 };
    config.nominal_sigma = ControlVec::zeros(2);
    let x0 = StateVec::new(&[0.0, 0.5, 0.0]);
    let schedule = ControlSchedule::constant(config.horizon, ControlVec::new(&[0.8, 0.1]));
    let batch = evaluate_batch(&model, &cost, &barriers, &schedule, &config, &x0, 0).unwrap();
    assert!(batch.perturbations().all(|d| d.norm() == 0.0));
    let traj = &batch.trajectories[0];
    let safeness: Vec<bool> = traj.states.iter().map(|s| scbf_mppi_core::barrier::is_safe(s, &barriers)).collect();
    assert_eq!(batch.costs[0], trajectory_cost(&cost, traj, &safeness).unwrap());

    let mut controller = Controller::new(model, cost, barriers, config).unwrap();
    controller.schedule = schedule.clone();
    let (u, diag) = controller.control_step(&x0).unwrap();
    assert_eq!(u, schedule.first());
    assert_eq!(diag.effective_sample_size, 1.0);
    assert_eq!(controller.schedule.inputs.last(), Some(&ControlVec::zeros(2)));
}

#[test]
fn update_and_shift_examples() {
    let barriers = narrow_passage(1.0, FRAC_PI_2, 3).to_vec();
    let (model, cost, mut config) = passage_setup(SamplingMode::Plain, 2);
    config.horizon = 3;
    let schedule = ControlSchedule::constant(3, ControlVec::new(&[1.0, -1.0]));
    let mut batch =
        evaluate_batch(&model, &cost, &barriers, &schedule, &config, &StateVec::new(&[0.0, 0.5, 0.0]), 0).unwrap();
    for t in 0..3 {
        batch.trajectories[0].perturbations[t] = ControlVec::new(&[2.0, 0.0]);
        batch.trajectories[1].perturbations[t] = ControlVec::new(&[0.0, 2.0]);
    }
    let half = compute_weights(&[5.0, 5.0], 1.0).unwrap();
    let updated = update_schedule(&schedule, &batch, &half).unwrap();
    assert!(updated.inputs.iter().all(|u| *u == ControlVec::new(&[2.0, 0.0])));
    let one_hot = compute_weights(&[0.0, 1e9], 1.0).unwrap();
    let picked = update_schedule(&schedule, &batch, &one_hot).unwrap();
    assert!(picked.inputs.iter().all(|u| *u == ControlVec::new(&[3.0, -1.0])));

    let seq = ControlSchedule {
        inputs: vec![ControlVec::new(&[1.0, 0.0]), ControlVec::new(&[2.0, 0.0]), ControlVec::new(&[3.0, 0.0])],
    };
    let shifted = shift_horizon(&seq, &ControlVec::new(&[9.0, 9.0]));
    assert_eq!(shifted.inputs, vec![seq.inputs[1], seq.inputs[2], ControlVec::new(&[9.0, 9.0])]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn update_is_a_convex_combination(costs in prop::collection::vec(0.0..50.0f64, 4), seed in 0u64..1000) {
        let barriers = narrow_passage(1.0, FRAC_PI_2, 3).to_vec();
        let (model, cost, mut config) = passage_setup(SamplingMode::Plain, 4);
        config.seed = seed;
        config.horizon = 5;
        let schedule = ControlSchedule::constant(5, ControlVec::zeros(2));
        let batch =
            evaluate_batch(&model, &cost, &barriers, &schedule, &config, &StateVec::new(&[0.0, 0.5, 0.0]), 0).unwrap();
        let w = compute_weights(&costs, 1.0).unwrap();
        let updated = update_schedule(&schedule, &batch, &w).unwrap();
        for t in 0..5 {
            for j in 0..2 {
                let lo = batch.trajectories.iter().map(|tr| tr.perturbations[t][j]).fold(f64::INFINITY, f64::min);
                let hi = batch.trajectories.iter().map(|tr| tr.perturbations[t][j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(updated.inputs[t][j] >= lo - 1e-12 && updated.inputs[t][j] <= hi + 1e-12);
            }
        }
    }
}
