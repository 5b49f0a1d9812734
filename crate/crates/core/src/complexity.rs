//! Sample-size bounds for the MPPI estimators: a Hoeffding bound `N₁` for
//! the mean weight and a Chebyshev bound `N₂` for the weighted update.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::ControlVec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityInputs {
    pub eps1: f64,
    pub eps2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub temperature: f64,
}

impl ComplexityInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0) || !(self.eps2 > 0.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: "error bounds must be positive" });
        }
        if !(self.rho1 > 0.0 && self.rho1 <= 2.0) {
            return Err(Error::InvalidParameter { name: "rho1", reason: "must lie in (0, 2]" });
        }
        if !(self.rho2 > 0.0 && self.rho2 <= 1.0) {
            return Err(Error::InvalidParameter { name: "rho2", reason: "must lie in (0, 1]" });
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter { name: "temperature", reason: "must be positive" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalStats {
    pub e1_hat: f64,
    pub var_du: ControlVec,
    pub n_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub inputs: ComplexityInputs,
    pub stats: EmpiricalStats,
    pub n1: u64,
    pub n2: u64,
    /// `max(n1, n2)`
    pub n: u64,
    /// `N₂` with `Ê₁ + ε₁` in place of `Ê₁ − ε₁`.
    pub n2_optimistic: u64,
}

fn ceil_count(v: f64) -> u64 {
    if v <= 0.0 {
        0
    } else if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        libm::ceil(v) as u64
    }
}

/// `⌈−ln(ρ₁/2)/ε₁²⌉`
pub fn n1_bound(eps1: f64, rho1: f64) -> Result<u64> {
    if !(eps1 > 0.0) {
        return Err(Error::InvalidParameter { name: "eps1", reason: "must be positive" });
    }
    if !(rho1 > 0.0 && rho1 <= 2.0) {
        return Err(Error::InvalidParameter { name: "rho1", reason: "must lie in (0, 2]" });
    }
    Ok(ceil_count(-libm::log(rho1 / 2.0) / (eps1 * eps1)))
}

/// `⌈4·Var[δu]/(ρ₂ε₂²)·(Ê₁ − ε₁)⁻²⌉`; requires `Ê₁ > ε₁`.
pub fn n2_bound(eps1: f64, eps2: f64, rho2: f64, var_du: f64, e1_hat: f64) -> Result<u64> {
    if !(eps2 > 0.0) || !(rho2 > 0.0) || !(eps1 > 0.0) {
        return Err(Error::InvalidParameter { name: "n2_bound", reason: "eps1, eps2 and rho2 must be positive" });
    }
    if !(var_du >= 0.0) {
        return Err(Error::InvalidParameter { name: "var_du", reason: "must be nonnegative" });
    }
    let gap = e1_hat - eps1;
    if !(gap > 0.0) {
        return Err(Error::AssumptionViolated { e1_hat, eps1 });
    }
    Ok(ceil_count(4.0 * var_du / (rho2 * eps2 * eps2) / (gap * gap)))
}

/// Per-dimension [`n2_bound`], maximized over control dimensions.
pub fn n2_bound_max(eps1: f64, eps2: f64, rho2: f64, var_du: &ControlVec, e1_hat: f64) -> Result<u64> {
    let mut n = 0;
    for &v in var_du.iter() {
        n = n.max(n2_bound(eps1, eps2, rho2, v, e1_hat)?);
    }
    if var_du.is_empty() {
        n2_bound(eps1, eps2, rho2, 0.0, e1_hat)?;
    }
    Ok(n)
}

/// Mean of `exp(−Sᵢ/λ)`.
pub fn estimate_e1(costs: &[f64], temperature: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::InvalidParameter { name: "costs", reason: "at least one cost required" });
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter { name: "temperature", reason: "must be positive" });
    }
    Ok(costs.iter().map(|&s| libm::exp(-s / temperature)).sum::<f64>() / costs.len() as f64)
}

/// Affine rescaling applied to batch costs before [`estimate_e1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostScaling {
    /// `S` as is.
    Raw,
    /// `S − min S`, the exponent the controller's weights use.
    Baseline,
    /// `(S − min S)/(max S − min S)`, mapping the batch onto `[0, 1]`.
    #[default]
    Range,
}

pub fn scale_costs(costs: &[f64], scaling: CostScaling) -> Vec<f64> {
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match scaling {
        CostScaling::Raw => costs.to_vec(),
        CostScaling::Baseline => costs.iter().map(|&s| s - lo).collect(),
        CostScaling::Range => {
            let span = hi - lo;
            costs.iter().map(|&s| if span > 0.0 { (s - lo) / span } else { 0.0 }).collect()
        }
    }
}

/// Unbiased per-dimension sample variance.
pub fn estimate_var_du(draws: &[ControlVec]) -> Result<ControlVec> {
    if draws.len() < 2 {
        return Err(Error::InvalidParameter { name: "draws", reason: "at least two draws required" });
    }
    let m = draws[0].len();
    let n = draws.len() as f64;
    // shifted by the first draw so constant input gives exactly zero
    let origin = draws[0];
    let mut sum = ControlVec::zeros(m);
    let mut sum_sq = ControlVec::zeros(m);
    for d in draws {
        if d.len() != m {
            return Err(Error::Dimension { context: "estimate_var_du", expected: m, actual: d.len() });
        }
        for j in 0..m {
            let e = d[j] - origin[j];
            sum[j] += e;
            sum_sq[j] += e * e;
        }
    }
    let var = ControlVec::from_fn(m, |j| ((sum_sq[j] - sum[j] * sum[j] / n) / (n - 1.0)).max(0.0));
    Ok(var)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn unbiased_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Empirical check of `Var[XY] ≤ 2·Var[X]·Var[Y] + 2·Var[Y]·E[X]²` with a
/// 3-sigma allowance for the sampling error of `Var[XY]`.
///
/// The inequality needs `Var[X]·E[Y]² ≤ Var[X]·Var[Y] + Var[Y]·E[X]²`
/// for independent pairs; it holds for zero-mean `Y` and can fail
/// otherwise (e.g. `Y ≡ 1`).
pub fn lemma1_check(x: &[f64], y: &[f64]) -> bool {
    assert_eq!(x.len(), y.len(), "paired samples");
    assert!(x.len() >= 2, "need at least two pairs");
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let var_z = unbiased_var(&z);
    let (vx, vy, mx) = (unbiased_var(x), unbiased_var(y), mean(x));
    let bound = 2.0 * vx * vy + 2.0 * vy * mx * mx;
    let mz = mean(&z);
    let n = z.len() as f64;
    let m2 = z.iter().map(|v| (v - mz) * (v - mz)).sum::<f64>() / n;
    let m4 = z.iter().map(|v| libm::pow(v - mz, 4.0)).sum::<f64>() / n;
    let slack = 3.0 * libm::sqrt((m4 - m2 * m2).max(0.0) / n);
    var_z <= bound + slack
}

/// `N₁`, `N₂` and `N = max(N₁, N₂)` for measured statistics.
pub fn complexity_report(inputs: ComplexityInputs, stats: EmpiricalStats) -> Result<ComplexityReport> {
    inputs.validate()?;
    let n1 = n1_bound(inputs.eps1, inputs.rho1)?;
    let n2 = n2_bound_max(inputs.eps1, inputs.eps2, inputs.rho2, &stats.var_du, stats.e1_hat)?;
    let n2_optimistic = optimistic(&inputs, &stats);
    Ok(ComplexityReport { inputs, stats, n1, n2, n: n1.max(n2), n2_optimistic })
}

fn optimistic(inputs: &ComplexityInputs, stats: &EmpiricalStats) -> u64 {
    let gap = stats.e1_hat + inputs.eps1;
    let mut n = 0;
    for &v in stats.var_du.iter() {
        n = n.max(ceil_count(4.0 * v / (inputs.rho2 * inputs.eps2 * inputs.eps2) / (gap * gap)));
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n1_examples() {
        assert_eq!(n1_bound(0.05, 0.05).unwrap(), 1476);
        assert_eq!(n1_bound(0.1, 0.05).unwrap(), 369);
        assert_eq!(n1_bound(0.3, 2.0).unwrap(), 0);
        assert!(n1_bound(0.0, 0.05).is_err());
        assert!(n1_bound(0.05, 0.0).is_err());
    }

    #[test]
    fn n2_examples() {
        assert_eq!(n2_bound(0.05, 0.1, 0.1, 1.0, 0.5).unwrap(), 19754);
        assert_eq!(n2_bound(0.05, 0.1, 0.1, 0.0, 0.5).unwrap(), 0);
        assert_eq!(
            n2_bound(0.05, 0.1, 0.1, 1.0, 0.05),
            Err(Error::AssumptionViolated { e1_hat: 0.05, eps1: 0.05 })
        );
        let v = ControlVec::new(&[0.25, 1.0]);
        assert_eq!(n2_bound_max(0.05, 0.1, 0.1, &v, 0.5).unwrap(), 19754);
    }

    #[test]
    fn e1_examples() {
        assert_eq!(estimate_e1(&[0.0, 0.0, 0.0], 1.0).unwrap(), 1.0);
        assert_eq!(estimate_e1(&[f64::INFINITY; 2], 1.0).unwrap(), 0.0);
        assert!((estimate_e1(&[0.0, libm::log(4.0)], 1.0).unwrap() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn cost_scalings() {
        let c = [3.0, 5.0, 7.0];
        assert_eq!(scale_costs(&c, CostScaling::Raw), c.to_vec());
        assert_eq!(scale_costs(&c, CostScaling::Baseline), [0.0, 2.0, 4.0].to_vec());
        assert_eq!(scale_costs(&c, CostScaling::Range), [0.0, 0.5, 1.0].to_vec());
        assert_eq!(scale_costs(&[2.0, 2.0], CostScaling::Range), [0.0, 0.0].to_vec());
    }

    #[test]
    fn var_examples() {
        let c = [ControlVec::new(&[0.4, -1.0]); 5];
        assert_eq!(estimate_var_du(&c).unwrap(), ControlVec::zeros(2));
        let pm = [ControlVec::new(&[-1.0, -1.0]), ControlVec::new(&[1.0, 1.0])];
        assert_eq!(estimate_var_du(&pm).unwrap(), ControlVec::new(&[2.0, 2.0]));
        assert!(estimate_var_du(&pm[..1]).is_err());
    }

    #[test]
    fn lemma1_degenerate_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [-1.0, 1.0, -1.0, 1.0];
        let constant_x = [2.0; 4];
        assert!(lemma1_check(&constant_x, &y));
        assert!(lemma1_check(&x, &[0.0; 4]));
        // Y ≡ 1: Var[XY] = Var[X] > 0 but the right side vanishes.
        assert!(!lemma1_check(&x, &[1.0; 4]));
    }

    #[test]
    fn report_takes_max() {
        let inputs = ComplexityInputs { eps1: 0.05, eps2: 0.1, rho1: 0.05, rho2: 0.1, temperature: 1.0 };
        let stats = EmpiricalStats { e1_hat: 0.5, var_du: ControlVec::new(&[0.01, 0.02]), n_used: 100 };
        let r = complexity_report(inputs, stats).unwrap();
        assert_eq!(r.n1, 1476);
        assert_eq!(r.n, r.n1.max(r.n2));
        assert!(r.n2_optimistic <= r.n2);
    }
}
