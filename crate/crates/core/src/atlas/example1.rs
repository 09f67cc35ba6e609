//! Dual value function that fails to be twice differentiable because the
//! lower risk-aversion bound is missing: `V″(k) = 2^k` on the support of a
//! density with `P[ξ = k] = 2^{−k}`.

use serde::{Deserialize, Serialize};

use super::{one_period_tree, ATLAS_FLOOR};
use crate::error::{Error, Result};
use crate::market::MarketTree;
use crate::report::ResidualTable;
use crate::utility::{build_constrained_utility, Baseline, ConstraintSet, CurvatureTarget, Level, Mode, UtilitySpec};

/// First tail atom; the smallest start with a feasible calibration.
pub const TAIL_START: usize = 5;
/// `θ`-mass of each curvature spike.
const SPIKE_MASS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example1Report {
    pub n: usize,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    /// `E[V″(ξ) ξ²]`.
    pub div1: f64,
    /// `Σ_{k=5}^{N} k²`, the tail contribution alone.
    pub tail_sum: f64,
    pub residuals: ResidualTable,
}

pub struct Example1 {
    pub report: Example1Report,
    pub tree: MarketTree<f64>,
    pub utility: UtilitySpec,
}

/// `P[ξ = ½]` and `P[ξ = 1]` making the truncated law a probability density
/// with mean one.
pub fn calibrate(n: usize) -> Result<(f64, f64)> {
    let t0: f64 = (TAIL_START..=n).map(|k| 0.5f64.powi(k as i32)).sum();
    let t1: f64 = (TAIL_START..=n).map(|k| k as f64 * 0.5f64.powi(k as i32)).sum();
    let half = 2.0 * (t1 - t0);
    let one = 1.0 - t0 - half;
    if !(half > 0.0 && one > 0.0) {
        return Err(Error::Infeasible(format!("calibration gives masses ({half}, {one})")));
    }
    Ok((half, one))
}

pub fn constraints(n: usize) -> ConstraintSet {
    ConstraintSet {
        mode: Mode::Dual,
        anchors: vec![(1.0, 1.0)],
        baseline: Some(Baseline::Affine { c0: 0.5, c1: 1.0 }),
        bumps: vec![],
        curvature_targets: (TAIL_START..=n)
            .map(|k| CurvatureTarget { at: k as f64, value: 2f64.powi(k as i32), mass: SPIKE_MASS })
            .collect(),
        moment: None,
        corridor: (0.01, 2.0),
        range: (1e-8, 4.0 * n as f64),
        level: Level::VanishBelow,
    }
}

pub fn example1(n: usize) -> Result<Example1> {
    if n < TAIL_START + 1 {
        return Err(Error::Precondition(format!("example 1 needs N ≥ {}, got {n}", TAIL_START + 1)));
    }
    let (half, one) = calibrate(n)?;
    let mut support = vec![0.5, 1.0];
    let mut probs = vec![half, one];
    for k in TAIL_START..=n {
        support.push(k as f64);
        probs.push(0.5f64.powi(k as i32));
    }
    let q: Vec<f64> = probs.iter().zip(&support).map(|(p, s)| p * s).collect();

    // complete market: asset j pays 1 in state j and q_j elsewhere
    let m = support.len();
    let assets: Vec<String> = (1..m).map(|j| format!("A{j}")).collect();
    let s0: Vec<f64> = (1..m).map(|j| q[j] * (2.0 - q[j])).collect();
    let outcomes = (0..m)
        .map(|i| (probs[i], (1..m).map(|j| if i == j { 1.0 } else { q[j] }).collect()))
        .collect();
    let tree = one_period_tree(assets, s0, outcomes, ATLAS_FLOOR)?;

    let cs = constraints(n);
    let utility = build_constrained_utility(&cs)?;
    let profile = utility.profile().expect("constrained utility has a profile");

    let mut res = ResidualTable::new();
    res.at_most("calibration.sum", (probs.iter().sum::<f64>() - 1.0).abs(), 1e-14);
    res.at_most("calibration.mean", (q.iter().sum::<f64>() - 1.0).abs(), 1e-14);
    let measure = tree.find_martingale_measure()?;
    let mm = measure.leaf_prob.iter().zip(&q).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    res.at_most("martingale_measure.density", mm, 1e-8);
    let spikes = (TAIL_START..=n)
        .map(|k| (profile.curvature(k as f64) / 2f64.powi(k as i32) - 1.0).abs())
        .fold(0.0, f64::max);
    res.at_most("spikes", spikes, 1e-12);

    let div1: f64 = probs.iter().zip(&support).map(|(p, s)| p * profile.curvature(*s) * s * s).sum();
    let tail_sum: f64 = (TAIL_START..=n).map(|k| (k * k) as f64).sum();
    res.below("div1.tail_bound", tail_sum - div1, 0.0);
    Ok(Example1 { report: Example1Report { n, support, probs, div1, tail_sum, residuals: res }, tree, utility })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untruncated_calibration() {
        let (half, one) = calibrate(200).unwrap();
        assert!((half - 5.0 / 8.0).abs() < 1e-15 && (one - 5.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn earlier_tail_start_is_infeasible() {
        let t0: f64 = (4..=200).map(|k| 0.5f64.powi(k)).sum();
        let t1: f64 = (4..=200).map(|k| k as f64 * 0.5f64.powi(k)).sum();
        assert!(1.0 - t0 - 2.0 * (t1 - t0) < 0.0);
    }

    #[test]
    fn small_level_is_consistent() {
        let e = example1(10).unwrap();
        assert!(e.report.residuals.passed(), "{}", e.report.residuals);
        assert!(e.tree.validate().is_valid());
    }
}
