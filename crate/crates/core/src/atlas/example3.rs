//! Without sigma-boundedness of `S^{X(1)}` the one-sided second difference
//! quotients of `u` at `x = 1` separate: from the right they stay above
//! `sup_a f(a) = f(½)`, from the left below `f(1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{one_period_tree, ATLAS_FLOOR};
use crate::error::{Error, Result};
use crate::market::{MarketTree, PredictableStrategy};
use crate::primal_dual::{solve_primal_with, PrimalDualSolution, SolverOptions};
use crate::report::ResidualTable;
use crate::utility::{build_constrained_utility, Bump, ConstraintSet, Level, Mode, MomentCondition, UtilitySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example3Options {
    /// `ε` range for the quotients; defaults to [`default_window`].
    pub window: Option<(f64, f64)>,
    /// Geometric grid size inside the window.
    pub points: usize,
}

impl Default for Example3Options {
    fn default() -> Self {
        Self { window: None, points: 4 }
    }
}

/// `[2^{5−N}, 10⁻²]`.
pub fn default_window(n: usize) -> (f64, f64) {
    (2f64.powi(5 - n as i32), 1e-2)
}

/// `[2^{7−N}, 10⁻²]`. Keeps `2^{−N}/ε ≤ 1/128`, where the truncated tail
/// no longer pulls `q₋` above `f(1) + 0.05·gap`. Empty for `N < 14`.
pub fn bias_safe_window(n: usize) -> (f64, f64) {
    (2f64.powi(7 - n as i32), 1e-2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quotient {
    pub eps: f64,
    /// `(u(1+ε) − u(1) − ε u′(1)) / (ε²/2)`.
    pub q_plus: f64,
    /// `(u(1−ε) − u(1) + ε u′(1)) / (ε²/2)`.
    pub q_minus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example3Report {
    pub n: usize,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    pub f_half: f64,
    pub f_one: f64,
    pub gap: f64,
    pub quotients: Vec<Quotient>,
    pub residuals: ResidualTable,
}

pub struct Example3 {
    pub report: Example3Report,
    pub tree: MarketTree<f64>,
    pub utility: UtilitySpec,
}

/// Law on `{2, 1, 2^{−1}, …, 2^{−N}}` with tail `8^{−k}`, `E[1/S₁] = 1`.
pub fn law(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut support = vec![2.0, 1.0];
    let mut probs = vec![0.0, 0.0];
    let (mut t8, mut t4) = (0.0, 0.0);
    for k in 1..=n {
        let p = 0.125f64.powi(k as i32);
        support.push(0.5f64.powi(k as i32));
        probs.push(p);
        t8 += p;
        t4 += 0.25f64.powi(k as i32);
    }
    probs[0] = 2.0 * (t4 - t8);
    probs[1] = 1.0 - probs[0] - t8;
    if !(probs[0] > 0.0 && probs[1] > 0.0) {
        return Err(Error::Infeasible(format!("calibration gives masses ({}, {})", probs[0], probs[1])));
    }
    Ok((support, probs))
}

pub fn constraints(support: &[f64], probs: &[f64]) -> ConstraintSet {
    ConstraintSet {
        mode: Mode::Utility,
        anchors: support.iter().map(|s| (*s, 1.0 / s)).collect(),
        baseline: None,
        bumps: vec![],
        curvature_targets: vec![],
        moment: Some(MomentCondition {
            points: support.to_vec(),
            probs: probs.to_vec(),
            weights: support.iter().map(|s| 1.0 - s * s).collect(),
            bump: Bump::ZeroMeanHalves { center: 2.0, half_width: 0.6, amplitude: 0.0, rho: 0.2 },
            bracket: (0.0, 20.0),
        }),
        corridor: (0.25, 5.0),
        range: (1e-60, 1e3),
        level: Level::Reference(0.0),
    }
}

/// `f(a) = E[U″(S₁)(1 + a(S₁ − 1))²]`.
pub fn f(utility: &UtilitySpec, support: &[f64], probs: &[f64], a: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (s, p) in support.iter().zip(probs) {
        let w = 1.0 + a * (s - 1.0);
        acc += p * utility.u2(*s)? * w * w;
    }
    Ok(acc)
}

pub fn example3(n: usize, opts: &Example3Options) -> Result<Example3> {
    if n < 4 {
        return Err(Error::Precondition(format!("example 3 needs N ≥ 4, got {n}")));
    }
    let (lo, hi) = opts.window.unwrap_or_else(|| default_window(n));
    if !(lo > 0.0 && lo < hi && hi < 1.0) || opts.points == 0 {
        return Err(Error::Precondition(format!("ε-window [{lo}, {hi}] is empty at N = {n}")));
    }
    let (support, probs) = law(n)?;
    let utility = build_constrained_utility(&constraints(&support, &probs))?;
    let tree = one_period_tree(
        vec!["S".into()],
        vec![1.0],
        support.iter().zip(&probs).map(|(s, p)| (*p, vec![*s])).collect(),
        ATLAS_FLOOR,
    )?;
    tree.find_martingale_measure()?;

    let hold = PredictableStrategy::constant(&tree, 1.0);
    let base = PrimalDualSolution::from_strategy(&tree, &utility, 1.0, hold.clone())?;
    let f_half = f(&utility, &support, &probs, 0.5)?;
    let f_one = f(&utility, &support, &probs, 1.0)?;
    let gap = f_half - f_one;

    let mut res = ResidualTable::new();
    res.at_most("calibration.inverse_mean", (probs.iter().zip(&support).map(|(p, s)| p / s).sum::<f64>() - 1.0).abs(), 1e-14);
    res.at_most("buy_and_hold.foc", base.foc_residual, 1e-10);
    res.at_most("marginal_utility", (base.u1 - 1.0).abs(), 1e-12);
    // f′(½) = E[U″(S₁)(S₁² − 1)]
    let slope: f64 = support.iter().zip(&probs).map(|(s, p)| p * utility.u2(*s).unwrap_or(f64::NAN) * (s * s - 1.0)).sum();
    res.at_most("f_prime_half", slope.abs() / f_half.abs(), 1e-9);
    res.below("gap", -gap, 0.0);

    let grid: Vec<f64> = if opts.points == 1 {
        vec![hi]
    } else {
        (0..opts.points).map(|i| hi * (lo / hi).powf(i as f64 / (opts.points - 1) as f64)).collect()
    };
    let warm = SolverOptions { warm_start: Some(hold.coordinates(&tree)), ..SolverOptions::tight() };
    let quotients = grid
        .par_iter()
        .map(|&eps| {
            let up = solve_primal_with(&tree, &utility, 1.0 + eps, &warm)?;
            let down = solve_primal_with(&tree, &utility, 1.0 - eps, &warm)?;
            let half_sq = 0.5 * eps * eps;
            Ok(Quotient {
                eps,
                q_plus: (up.u - base.u - eps * base.u1) / half_sq,
                q_minus: (down.u - base.u + eps * base.u1) / half_sq,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = 0.05 * gap;
    let worst_plus = quotients.iter().map(|q| f_half - q.q_plus).fold(f64::NEG_INFINITY, f64::max);
    let worst_minus = quotients.iter().map(|q| q.q_minus - f_one).fold(f64::NEG_INFINITY, f64::max);
    res.at_most("q_plus.lower_bound", worst_plus, tol);
    res.at_most("q_minus.upper_bound", worst_minus, tol);

    Ok(Example3 {
        report: Example3Report { n, support, probs, f_half, f_one, gap, quotients, residuals: res },
        tree,
        utility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_truncations_have_no_window() {
        assert!(matches!(example3(10, &Example3Options::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn bounds_hold_in_bias_safe_window() {
        let opts = Example3Options { window: Some(bias_safe_window(14)), points: 3 };
        let e = example3(14, &opts).unwrap();
        assert!(e.report.residuals.passed(), "{}", e.report.residuals);
        assert!(e.report.gap > 0.18 && e.report.gap < 0.2);
        let q = e.report.quotients[0];
        assert!(q.q_plus - q.q_minus >= 0.9 * e.report.gap);
    }
}
