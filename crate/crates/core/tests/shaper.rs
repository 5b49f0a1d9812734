use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scbf_mppi_core::reference::grid_objective;
use scbf_mppi_core::shaper::{
    chance_violation_rate, constraint_satisfied, constraint_slack, lmi_feasible, shape, shaping_objective,
};
use scbf_mppi_core::{
    AlphaForm, ConstraintCoeffs, ControlMatrix, ControlVec, GaussianDist, SafetyParams, ShaperProblem, ShaperStatus,
};

const ALPHA: f64 = 2.7477813854449926;

fn params(form: AlphaForm) -> SafetyParams {
    SafetyParams { delta: 0.003, alpha: ALPHA, alpha_form: form }
}

fn cv(v: &[f64]) -> ControlVec {
    ControlVec::new(v)
}

fn random_problem(rng: &mut ChaCha8Rng, form: AlphaForm) -> ShaperProblem {
    let m = rng.random_range(1..=2);
    let mean = ControlVec::from_fn(m, |_| rng.random_range(-0.5..0.5));
    let std = ControlVec::from_fn(m, |_| rng.random_range(0.2..1.2));
    let k = rng.random_range(1..=2);
    let constraints = (0..k)
        .map(|_| ConstraintCoeffs {
            a: ControlVec::from_fn(m, |_| rng.random_range(-1.5..1.5)),
            b: rng.random_range(-0.5..1.0),
        })
        .collect();
    ShaperProblem::new(GaussianDist::diagonal(mean, &std), constraints, params(form))
}

#[test]
fn shaper_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 30 {
        let form = if checked % 2 == 0 { AlphaForm::Variance } else { AlphaForm::StdDev };
        let problem = random_problem(&mut rng, form);
        let sol = shape(&problem).unwrap();
        if sol.status != ShaperStatus::Shaped {
            continue;
        }
        let oracle = grid_objective(&problem, 1e-3);
        assert!(oracle.is_finite());
        assert!(sol.objective <= oracle + 1e-7, "{problem:?}: shaper {} above grid {oracle}", sol.objective);
        assert!(oracle - sol.objective <= 1e-2, "{problem:?}: shaper {} vs grid {oracle}", sol.objective);
        checked += 1;
    }
}

#[test]
fn single_constraint_closed_form() {
    // μ₀ = 0, P₀ = I, A = e₁, b = 0: shrink P₁₁ to 1/(2α) and shift μ₁ by 1/(4α)
    let problem = ShaperProblem::new(
        GaussianDist::diagonal(cv(&[0.0, 0.0]), &cv(&[1.0, 1.0])),
        vec![ConstraintCoeffs { a: cv(&[1.0, 0.0]), b: 0.0 }],
        params(AlphaForm::Variance),
    );
    let sol = shape(&problem).unwrap();
    assert_eq!(sol.status, ShaperStatus::Shaped);
    let expected = 1.0 - 1.0 / (4.0 * ALPHA);
    assert!((sol.objective - expected).abs() < 1e-6, "{} vs {expected}", sol.objective);
    assert!((sol.shaped.factor[(0, 0)] - 1.0 / (2.0 * ALPHA)).abs() < 1e-6);
    assert_eq!(sol.shaped.factor[(1, 1)], 1.0);
    assert!((grid_objective(&problem, 1e-3) - expected).abs() < 1e-2);
}

fn nalgebra_min_eigen(dist: &GaussianDist, c: &ConstraintCoeffs, alpha: f64) -> f64 {
    let m = dist.dim();
    let mut block = DMatrix::<f64>::identity(m + 1, m + 1);
    let w: ControlVec = dist.factor.tr_mul_vec(&c.a);
    for i in 0..m {
        block[(i, m)] = alpha.sqrt() * w[i];
        block[(m, i)] = alpha.sqrt() * w[i];
    }
    block[(m, m)] = c.a.dot(&dist.mean) - c.b;
    SymmetricEigen::new(block).eigenvalues.min()
}

#[test]
fn lmi_block_agrees_with_scalar_form_and_reference_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let m = rng.random_range(1..=4);
        let mut factor = ControlMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                factor[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let dist = GaussianDist::new(ControlVec::from_fn(m, |_| rng.random_range(-2.0..2.0)), factor);
        let c = ConstraintCoeffs {
            a: ControlVec::from_fn(m, |_| rng.random_range(-2.0..2.0)),
            b: rng.random_range(-3.0..3.0),
        };
        let p = SafetyParams { delta: 0.003, alpha: rng.random_range(0.0..4.0), alpha_form: AlphaForm::Variance };
        let reference = nalgebra_min_eigen(&dist, &c, p.alpha) >= -1e-9;
        assert_eq!(lmi_feasible(&dist, &c, &p), reference);
        assert_eq!(constraint_satisfied(&dist, &c, &p), reference);
    }
}

#[test]
fn std_dev_form_bounds_violation_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = params(AlphaForm::StdDev);
    let n = 100_000;
    let limit = p.delta + 3.0 * (p.delta * (1.0 - p.delta) / n as f64).sqrt();
    let mut checked = 0;
    while checked < 20 {
        let problem = random_problem(&mut rng, AlphaForm::StdDev);
        let sol = shape(&problem).unwrap();
        if sol.status != ShaperStatus::Shaped {
            continue;
        }
        for c in &problem.constraints {
            let rate = chance_violation_rate(&sol.shaped, c, n, &mut rng);
            assert!(rate <= limit, "rate {rate} above {limit}");
        }
        checked += 1;
    }
}

fn arb_problem() -> impl Strategy<Value = ShaperProblem> {
    (1usize..=4, 1usize..=3, any::<bool>()).prop_flat_map(|(m, k, std_dev)| {
        let form = if std_dev { AlphaForm::StdDev } else { AlphaForm::Variance };
        (
            prop::collection::vec(-1.0..1.0f64, m),
            prop::collection::vec(0.0..2.0f64, m),
            prop::collection::vec((prop::collection::vec(-2.0..2.0f64, m), -1.0..1.5f64), k),
        )
            .prop_map(move |(mean, std, cs)| {
                let constraints = cs.into_iter().map(|(a, b)| ConstraintCoeffs { a: cv(&a), b }).collect();
                ShaperProblem::new(GaussianDist::diagonal(cv(&mean), &cv(&std)), constraints, params(form))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shaped_output_is_feasible_and_shrinks(problem in arb_problem()) {
        let sol = shape(&problem).unwrap();
        let nominal = &problem.nominal;
        match sol.status {
            ShaperStatus::Unchanged => {
                prop_assert_eq!(sol.shaped, *nominal);
                prop_assert_eq!(sol.objective, 0.0);
                for c in &problem.constraints {
                    prop_assert!(constraint_slack(nominal, c, &problem.params) >= -problem.tolerance);
                }
            }
            ShaperStatus::Shaped => {
                prop_assert!(sol.shaped.factor.is_diagonal());
                for c in &problem.constraints {
                    prop_assert!(constraint_slack(&sol.shaped, c, &problem.params) >= -1e-7);
                    prop_assert!(sol.shaped.projected_variance(&c.a) <= nominal.projected_variance(&c.a) + 1e-9);
                }
                for j in 0..nominal.dim() {
                    prop_assert!(sol.shaped.factor[(j, j)] >= 0.0);
                    prop_assert!(sol.shaped.factor[(j, j)] <= nominal.factor[(j, j)] + 1e-9);
                }
                prop_assert!((sol.objective - shaping_objective(nominal, &sol.shaped)).abs() < 1e-12);
                let again = shape(&ShaperProblem { nominal: sol.shaped, ..problem.clone() }).unwrap();
                prop_assert_eq!(again.status, ShaperStatus::Unchanged);
            }
            ShaperStatus::Infeasible => prop_assert_eq!(sol.shaped, *nominal),
        }
    }

    #[test]
    fn single_constraint_never_worse_than_mean_shift(problem in arb_problem()) {
        // keep only the first constraint: then a pure mean shift along the
        // largest |Aⱼ| is always a feasible competitor
        let c = problem.constraints[0];
        prop_assume!(c.a.norm() > 1e-3);
        let single = ShaperProblem { constraints: vec![c], ..problem };
        let sol = shape(&single).unwrap();
        prop_assert_ne!(sol.status, ShaperStatus::Infeasible);
        let gap = (-constraint_slack(&single.nominal, &c, &single.params)).max(0.0);
        let inf_norm = c.a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        prop_assert!(sol.objective <= gap / inf_norm + 1e-7);
    }
}
