//! Risk-aversion diagnostics: corridor scans, marginal-ratio bounds, the
//! asymptotic-elasticity probe and the second-order expansion probe.

use serde::{Deserialize, Serialize};

use super::spec::UtilitySpec;
use crate::error::{Error, Result};
use crate::market::{Measure, OutcomeVector};

/// Relative risk aversion `−xU″(x)/U′(x)`.
pub fn rra(u: &UtilitySpec, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain { x, lo: u.domain.0, hi: u.domain.1 });
    }
    let (u1, u2) = u.marginals(x)?;
    Ok(-x * u2 / u1)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorScan {
    pub min: f64,
    pub max: f64,
    /// `(x, A(x))` where `A` leaves the open corridor.
    pub violations: Vec<(f64, f64)>,
}

impl CorridorScan {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn corridor_scan(u: &UtilitySpec, grid: &[f64]) -> Result<CorridorScan> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty grid".into()));
    }
    let (c1, c2) = u.corridor;
    let mut scan = CorridorScan { min: f64::INFINITY, max: f64::NEG_INFINITY, violations: Vec::new() };
    for &x in grid {
        let a = rra(u, x)?;
        scan.min = scan.min.min(a);
        scan.max = scan.max.max(a);
        if !(a > c1 && a < c2) {
            scan.violations.push((x, a));
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRatioReport {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    /// Smallest of `U′(ax)/U′(x) − b1` and `b2 − U′(ax)/U′(x)` over the grid.
    pub min_margin: f64,
    /// Grid points where either strict inequality fails.
    pub failures: Vec<f64>,
}

impl MarginalRatioReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `b1 U′(x) < U′(ax) < b2 U′(x)` with `b1 = 1 − c2 ln a` and
/// `b2 = 1/(1 + c1 ln a)` taken from the declared corridor.
pub fn marginal_ratio_check(u: &UtilitySpec, a: f64, grid: &[f64]) -> Result<MarginalRatioReport> {
    let (c1, c2) = u.corridor;
    if !(a > 1.0) {
        return Err(Error::Precondition(format!("ratio a = {a} must exceed 1")));
    }
    let b1 = 1.0 - c2 * a.ln();
    if !(b1 > 0.0) {
        return Err(Error::Precondition(format!("1 − c2 ln a = {b1} is not positive")));
    }
    let b2 = 1.0 / (1.0 + c1 * a.ln());
    let mut report = MarginalRatioReport { a, b1, b2, min_margin: f64::INFINITY, failures: Vec::new() };
    for &x in grid {
        let r = u.u1(a * x)? / u.u1(x)?;
        let margin = (r - b1).min(b2 - r);
        report.min_margin = report.min_margin.min(margin);
        if !(margin > 0.0) {
            report.failures.push(x);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ElasticityProbe {
    /// `U ≤ 0` on the whole grid, so the limsup condition holds vacuously.
    TriviallySatisfied,
    Sampled {
        /// `(x, xU′(x)/U(x))` where `U(x) > 0`.
        ratios: Vec<(f64, f64)>,
        /// Some ratio on the largest decade exceeds `1 − 1e−6`.
        flagged: bool,
    },
}

pub fn elasticity_probe(u: &UtilitySpec, grid: &[f64]) -> Result<ElasticityProbe> {
    let mut ratios = Vec::new();
    for &x in grid {
        let v = u.eval(x)?;
        if v.u > 0.0 {
            ratios.push((x, x * v.u1 / v.u));
        }
    }
    if ratios.is_empty() {
        return Ok(ElasticityProbe::TriviallySatisfied);
    }
    let top = grid.iter().cloned().fold(0.0, f64::max);
    let flagged = ratios.iter().any(|(x, r)| *x >= top / 10.0 && *r > 1.0 - 1e-6);
    Ok(ElasticityProbe::Sampled { ratios, flagged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSample {
    pub s: f64,
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub w1_fd: f64,
    pub w2_fd: f64,
}

fn w_values(u: &UtilitySpec, zeta: &OutcomeVector<f64>, eta: &OutcomeVector<f64>, p: &Measure<f64>, s: f64) -> Result<(f64, f64, f64)> {
    let mut acc = (0.0, 0.0, 0.0);
    for ((z, e), q) in zeta.values.iter().zip(&eta.values).zip(&p.leaf_prob) {
        let v = u.eval(z + s * e)?;
        acc.0 += q * v.u;
        acc.1 += q * v.u1 * e;
        acc.2 += q * v.u2 * e * e;
    }
    Ok(acc)
}

/// `w(s) = E[U(ζ + sη)]` with the analytic `w′ = E[U′(ζ+sη)η]`,
/// `w″ = E[U″(ζ+sη)η²]` and their central differences at step `h`.
pub fn expansion_probe(
    u: &UtilitySpec,
    zeta: &OutcomeVector<f64>,
    eta: &OutcomeVector<f64>,
    p: &Measure<f64>,
    s_grid: &[f64],
    h: f64,
) -> Result<Vec<ExpansionSample>> {
    if zeta.values.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::Precondition("ζ must be strictly positive".into()));
    }
    let k = zeta.values.iter().zip(&eta.values).map(|(z, e)| e.abs() / z).fold(0.0, f64::max);
    let reach = if k > 0.0 { 1.0 / k } else { f64::INFINITY };
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if !(s.abs() + h < reach) {
            return Err(Error::Precondition(format!("|s| + h = {} not below 1/K = {reach}", s.abs() + h)));
        }
        let (w, w1, w2) = w_values(u, zeta, eta, p, s)?;
        let (wp, _, _) = w_values(u, zeta, eta, p, s + h)?;
        let (wm, _, _) = w_values(u, zeta, eta, p, s - h)?;
        out.push(ExpansionSample {
            s,
            w,
            w1,
            w2,
            w1_fd: (wp - wm) / (2.0 * h),
            w2_fd: (wp - 2.0 * w + wm) / (h * h),
        });
    }
    Ok(out)
}

/// Errors of the central second difference of `w` at `s = 0` for steps
/// `h, h/2, h/4, …` (`levels` of them).
pub fn expansion_fd_errors(
    u: &UtilitySpec,
    zeta: &OutcomeVector<f64>,
    eta: &OutcomeVector<f64>,
    p: &Measure<f64>,
    h: f64,
    levels: usize,
) -> Result<Vec<f64>> {
    (0..levels)
        .map(|i| {
            let step = h / 2f64.powi(i as i32);
            let s = expansion_probe(u, zeta, eta, p, &[0.0], step)?[0];
            Ok((s.w2_fd - s.w2).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rra_families() {
        for g in [0.5, 1.0, 3.0] {
            let u = UtilitySpec::power(g);
            let scan = corridor_scan(&u, &log_grid(1e-3, 1e3, 25)).unwrap();
            assert!((scan.min - g).abs() < 1e-13 && (scan.max - g).abs() < 1e-13);
            assert!(scan.passed());
        }
    }

    #[test]
    fn blend_rra_is_between_components() {
        let u = UtilitySpec::blend(vec![(1.0, 0.5), (1.0, 2.0)]);
        let scan = corridor_scan(&u, &log_grid(1e-2, 1e2, 40)).unwrap();
        assert!(scan.min > 0.5 && scan.max < 2.0 && scan.passed());
    }

    #[test]
    fn lemma_bounds_for_power_two() {
        let u = UtilitySpec::power(2.0).with_corridor(1.9, 2.1);
        let r = marginal_ratio_check(&u, 1.2, &log_grid(0.01, 100.0, 60)).unwrap();
        assert!(r.passed());
        assert!((1.2f64.powi(-2) - 0.694).abs() < 1e-3);
        assert!(marginal_ratio_check(&u, 2.0, &[1.0]).is_err());
    }

    #[test]
    fn elasticity_branches() {
        match elasticity_probe(&UtilitySpec::power(0.5), &log_grid(1.0, 1e6, 7)).unwrap() {
            ElasticityProbe::Sampled { ratios, flagged } => {
                assert!(!flagged);
                assert!(ratios.iter().all(|(_, r)| (r - 0.5).abs() < 1e-14));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            elasticity_probe(&UtilitySpec::power(2.0), &log_grid(1.0, 1e6, 7)).unwrap(),
            ElasticityProbe::TriviallySatisfied
        );
    }

    #[test]
    fn expansion_second_differences_are_order_two() {
        let u = UtilitySpec::power(3.0);
        let zeta = OutcomeVector::new(vec![1.0, 2.0, 0.5]);
        let eta = OutcomeVector::new(vec![0.3, -0.5, 0.2]);
        let p = Measure::new(vec![0.2, 0.3, 0.5]);
        let errs = expansion_fd_errors(&u, &zeta, &eta, &p, 0.1, 3).unwrap();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.3, "{errs:?}");
        }
        let zero = OutcomeVector::new(vec![0.0; 3]);
        let s = expansion_probe(&u, &zeta, &zero, &p, &[0.0], 0.1).unwrap()[0];
        assert_eq!((s.w1, s.w2), (0.0, 0.0));
    }
}
