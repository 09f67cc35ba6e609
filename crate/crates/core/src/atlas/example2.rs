//! Value function that fails to be twice differentiable because the upper
//! risk-aversion bound is missing: `−U″(k) = 2^k` where `P[S₁ = k] = 2^{−k}`,
//! while buying and holding one share stays optimal at `x = 1`.

use serde::{Deserialize, Serialize};

use super::{one_period_tree, ATLAS_FLOOR};
use crate::error::{Error, Result};
use crate::market::{MarketTree, PredictableStrategy};
use crate::primal_dual::{first_order_audit, PrimalDualSolution};
use crate::report::ResidualTable;
use crate::utility::{build_constrained_utility, Baseline, ConstraintSet, CurvatureTarget, Level, Mode, UtilitySpec};

pub const TAIL_START: usize = 2;
const SPIKE_MASS: f64 = 1e-9;
pub const DEFAULT_A_GRID: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example2Report {
    pub n: usize,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    /// First-order residual of buy-and-hold at `x = 1`.
    pub foc_residual: f64,
    /// `(a, E[U″(S₁)(1 + a(S₁ − 1))²])`.
    pub div2: Vec<(f64, f64)>,
    /// Componentwise maxima of `S^{X(1)} = (1/S, 1)` over all nodes.
    pub numeraire_bound: (f64, f64),
    pub residuals: ResidualTable,
}

pub struct Example2 {
    pub report: Example2Report,
    pub tree: MarketTree<f64>,
    pub utility: UtilitySpec,
    pub buy_and_hold: PrimalDualSolution,
}

pub fn constraints(n: usize) -> ConstraintSet {
    ConstraintSet {
        mode: Mode::Utility,
        // U′(x) = x^{−½}/(1 + x) before the spikes
        anchors: vec![(1.0, 0.5)],
        baseline: Some(Baseline::Logistic { lo: 0.5, hi: 1.5, center: 0.0, scale: 1.0 }),
        bumps: vec![],
        curvature_targets: (TAIL_START..=n)
            .map(|k| CurvatureTarget { at: k as f64, value: 2f64.powi(k as i32), mass: SPIKE_MASS })
            .collect(),
        moment: None,
        corridor: (0.5, 1.5),
        range: (1e-6, 4.0 * n as f64),
        level: Level::VanishAbove,
    }
}

/// `E[U″(S₁)(1 + a(S₁ − 1))²]` on the truncated law.
pub fn div2(utility: &UtilitySpec, support: &[f64], probs: &[f64], a: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (s, p) in support.iter().zip(probs) {
        let w = 1.0 + a * (s - 1.0);
        acc += p * utility.u2(*s)? * w * w;
    }
    Ok(acc)
}

pub fn example2(n: usize, a_grid: &[f64]) -> Result<Example2> {
    if n < 4 {
        return Err(Error::Precondition(format!("example 2 needs N ≥ 4, got {n}")));
    }
    let utility = build_constrained_utility(&constraints(n))?;
    let mut support = vec![0.5, 1.0];
    let mut probs = vec![0.0, 0.0];
    let mut pull = 0.0;
    for k in TAIL_START..=n {
        let p = 0.5f64.powi(k as i32);
        support.push(k as f64);
        probs.push(p);
        pull += p * utility.u1(k as f64)? * (k as f64 - 1.0);
    }
    // E[U′(S₁)(S₁ − 1)] = 0 is linear in the mass at ½
    probs[0] = pull / (0.5 * utility.u1(0.5)?);
    probs[1] = 1.0 - probs.iter().sum::<f64>();
    if !(probs[1] > 0.0) {
        return Err(Error::Infeasible(format!("calibration gives P[S₁ = 1] = {}", probs[1])));
    }
    let tree = one_period_tree(
        vec!["S".into()],
        vec![1.0],
        support.iter().zip(&probs).map(|(s, p)| (*p, vec![*s])).collect(),
        ATLAS_FLOOR,
    )?;
    tree.find_martingale_measure()?;
    let sol = PrimalDualSolution::from_strategy(&tree, &utility, 1.0, PredictableStrategy::constant(&tree, 1.0))?;

    let mut res = ResidualTable::new();
    res.at_most("calibration.sum", (probs.iter().sum::<f64>() - 1.0).abs(), 1e-14);
    res.at_most("buy_and_hold.foc", sol.foc_residual, 1e-10);
    let audit = first_order_audit(&sol, &tree, &utility)?;
    res.merge("audit", &audit);
    let sx = tree.numeraire_change(&sol.wealth)?;
    let bound = sx.nodes().iter().fold((0.0f64, 0.0f64), |(a, b), node| (a.max(node.prices[0]), b.max(node.prices[1])));
    res.at_most("numeraire_bound.inverse", (bound.0 - 2.0).abs(), 1e-14);
    res.at_most("numeraire_bound.ratio", (bound.1 - 1.0).abs(), 1e-14);

    let div2 = a_grid.iter().map(|&a| Ok((a, div2(&utility, &support, &probs, a)?))).collect::<Result<Vec<_>>>()?;
    Ok(Example2 {
        report: Example2Report { n, support, probs, foc_residual: sol.foc_residual, div2, numeraire_bound: bound, residuals: res },
        tree,
        utility,
        buy_and_hold: sol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buy_and_hold_is_optimal() {
        let e = example2(8, &DEFAULT_A_GRID).unwrap();
        assert!(e.report.residuals.passed(), "{}", e.report.residuals);
        let at_one = e.report.div2.iter().find(|(a, _)| *a == 1.0).unwrap().1;
        let squares: f64 = (2..=8).map(|k| (k * k) as f64).sum();
        assert!(at_one < -squares);
    }
}
