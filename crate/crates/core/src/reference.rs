//! Brute-force reference solutions for small shaping problems, used to
//! check [`shape`](crate::shaper::shape).

use alloc::vec::Vec;

use crate::barrier::AlphaForm;
use crate::shaper::ShaperProblem;

/// `min ‖d‖₁ s.t. aₖ·d ≥ rₖ` for `m ≤ 2`, by enumerating the vertices of the
/// arrangement formed by the constraint lines and the axes. Infinite when
/// infeasible.
pub fn min_l1_shift(a: &[[f64; 2]], r: &[f64], m: usize) -> f64 {
    assert!((1..=2).contains(&m), "min_l1_shift handles m ≤ 2");
    let feasible = |d: [f64; 2]| {
        a.iter().zip(r).all(|(ak, &rk)| ak[0] * d[0] + ak[1] * d[1] - rk >= -1e-12 * (1.0 + libm::fabs(rk)))
    };
    let mut candidates = alloc::vec![[0.0, 0.0]];
    for (ak, &rk) in a.iter().zip(r) {
        for j in 0..m {
            if ak[j] != 0.0 {
                let mut d = [0.0, 0.0];
                d[j] = rk / ak[j];
                candidates.push(d);
            }
        }
    }
    if m == 2 {
        for i in 0..a.len() {
            for k in i + 1..a.len() {
                let det = a[i][0] * a[k][1] - a[i][1] * a[k][0];
                if libm::fabs(det) > 1e-12 {
                    let d0 = (r[i] * a[k][1] - a[i][1] * r[k]) / det;
                    let d1 = (a[i][0] * r[k] - r[i] * a[k][0]) / det;
                    candidates.push([d0, d1]);
                }
            }
        }
    }
    candidates
        .into_iter()
        .filter(|&d| feasible(d))
        .map(|d| libm::fabs(d[0]) + libm::fabs(d[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Best objective over a grid of diagonal factors `0 ≤ pⱼ ≤ p0ⱼ` with step
/// `resolution` (the nominal value is always a grid point), taking the
/// exact best mean shift at each point. Needs a diagonal nominal factor
/// and `m ≤ 2`.
pub fn grid_objective(problem: &ShaperProblem, resolution: f64) -> f64 {
    let m = problem.nominal.dim();
    assert!((1..=2).contains(&m), "grid_objective handles m ≤ 2");
    let mu0 = problem.nominal.mean;
    let p0: Vec<f64> = (0..m).map(|j| problem.nominal.factor[(j, j)]).collect();
    let a: Vec<[f64; 2]> =
        problem.constraints.iter().map(|c| [c.a[0], if m > 1 { c.a[1] } else { 0.0 }]).collect();
    let steps: Vec<usize> = p0.iter().map(|p| libm::round(p / resolution) as usize).collect();
    let level = |j: usize, i: usize| if i == steps[j] { p0[j] } else { i as f64 * resolution };
    let mut best = f64::INFINITY;
    let mut r = alloc::vec![0.0; a.len()];
    for i0 in 0..=steps[0] {
        for i1 in 0..=if m > 1 { steps[1] } else { 0 } {
            let p = [level(0, i0), if m > 1 { level(1, i1) } else { 0.0 }];
            let d0 = p[0] - p0[0];
            let d1 = if m > 1 { p[1] - p0[1] } else { 0.0 };
            let dp = libm::sqrt(d0 * d0 + d1 * d1);
            if dp >= best {
                continue;
            }
            for (k, c) in problem.constraints.iter().enumerate() {
                let var = a[k][0] * a[k][0] * p[0] * p[0] + a[k][1] * a[k][1] * p[1] * p[1];
                let spread = match problem.params.alpha_form {
                    AlphaForm::Variance => problem.params.alpha * var,
                    AlphaForm::StdDev => problem.params.alpha * libm::sqrt(var),
                };
                r[k] = c.b + spread - c.a.dot(&mu0);
            }
            best = best.min(dp + min_l1_shift(&a, &r, m));
        }
    }
    best
}
