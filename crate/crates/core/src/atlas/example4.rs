//! A regular model whose derivative wealth process is negative with positive
//! probability: `X′(1) = 1 + (4/3)(S − 1)`.

use serde::{Deserialize, Serialize};

use super::one_period_tree;
use crate::error::Result;
use crate::market::{MarketTree, PROBABILITY_FLOOR};
use crate::numerics::roots::brent;
use crate::primal_dual::{solve_primal, PrimalDualSolution};
use crate::report::ResidualTable;
use crate::sensitivity::{sensitivity, SensitivityReport};
use crate::utility::{build_constrained_utility, Bump, ConstraintSet, Level, Mode, MomentCondition, UtilitySpec};

pub const SUPPORT: [f64; 4] = [0.125, 0.25, 0.5, 2.0];
pub const SLOPE: f64 = 4.0 / 3.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example4Report {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    /// Leafwise `X′₁(1)` from the sensitivity engine.
    pub xp_terminal: Vec<f64>,
    /// `1 + (4/3)(S₁ − 1)`.
    pub xp_expected: Vec<f64>,
    pub prob_negative: f64,
    pub prob_zero: f64,
    pub a: f64,
    pub residuals: ResidualTable,
}

pub struct Example4 {
    pub report: Example4Report,
    pub tree: MarketTree<f64>,
    pub utility: UtilitySpec,
    pub solution: PrimalDualSolution,
    pub sensitivity: SensitivityReport,
}

/// Maximum-entropy law on [`SUPPORT`] with `E[1/S₁] = 1`: `p ∝ exp(λ/s)`.
pub fn max_entropy_law() -> Result<Vec<f64>> {
    let law = |lam: f64| -> Vec<f64> {
        let w: Vec<f64> = SUPPORT.iter().map(|s| (lam / s).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    };
    let mean = |lam: f64| -> Result<f64> { Ok(law(lam).iter().zip(&SUPPORT).map(|(p, s)| p / s).sum::<f64>() - 1.0) };
    let lam = brent(mean, -10.0, 0.0, 1e-15)?;
    Ok(law(lam))
}

pub fn constraints(probs: &[f64]) -> ConstraintSet {
    ConstraintSet {
        mode: Mode::Utility,
        anchors: SUPPORT.iter().map(|s| (*s, 1.0 / s)).collect(),
        baseline: None,
        bumps: vec![],
        curvature_targets: vec![],
        moment: Some(MomentCondition {
            points: SUPPORT.to_vec(),
            probs: probs.to_vec(),
            weights: SUPPORT.iter().map(|s| (1.0 + SLOPE * (s - 1.0)) * (s - 1.0)).collect(),
            bump: Bump::ZeroMeanHalves {
                center: 0.5,
                half_width: 0.9 * std::f64::consts::LN_2,
                amplitude: 0.0,
                rho: 0.2,
            },
            bracket: (-3.0, 3.0),
        }),
        corridor: (0.2, 5.0),
        range: (1e-4, 1e4),
        level: Level::Reference(0.0),
    }
}

pub fn example4() -> Result<Example4> {
    let probs = max_entropy_law()?;
    let tree = one_period_tree(
        vec!["S".into()],
        vec![1.0],
        SUPPORT.iter().zip(&probs).map(|(s, p)| (*p, vec![*s])).collect(),
        PROBABILITY_FLOOR,
    )?;
    let utility = build_constrained_utility(&constraints(&probs))?;
    let solution = solve_primal(&tree, &utility, 1.0)?;
    let sens = sensitivity(&tree, &utility, &solution)?;
    let xp = sens.xp_terminal(&tree).values;
    let expected: Vec<f64> = SUPPORT.iter().map(|s| 1.0 + SLOPE * (s - 1.0)).collect();

    let mut res = ResidualTable::new();
    res.at_most("calibration.inverse_mean", (probs.iter().zip(&SUPPORT).map(|(p, s)| p / s).sum::<f64>() - 1.0).abs(), 1e-14);
    let hold = solution.terminal_wealth(&tree);
    res.at_most(
        "buy_and_hold",
        hold.values.iter().zip(&SUPPORT).map(|(x, s)| (x - s).abs()).fold(0.0, f64::max),
        1e-10,
    );
    res.at_most("xp_table", xp.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max), 1e-9);
    // 1 + α̂ = (x / X_T) X′_T
    let alpha = sens
        .alpha_hat
        .values
        .iter()
        .zip(hold.values.iter().zip(&expected))
        .map(|(al, (x, e))| (1.0 + al - e / x).abs())
        .fold(0.0, f64::max);
    res.at_most("alpha_hat", alpha, 1e-9);
    res.merge("engine", &sens.residuals);

    let prob_negative = probs.iter().zip(&xp).filter(|(_, v)| **v < -1e-9).map(|(p, _)| p).sum();
    let prob_zero = probs.iter().zip(&xp).filter(|(_, v)| v.abs() <= 1e-9).map(|(p, _)| p).sum();
    Ok(Example4 {
        report: Example4Report {
            support: SUPPORT.to_vec(),
            probs,
            xp_terminal: xp,
            xp_expected: expected,
            prob_negative,
            prob_zero,
            a: sens.a,
            residuals: res,
        },
        tree,
        utility,
        solution,
        sensitivity: sens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_process_matches() {
        let e = example4().unwrap();
        assert!(e.report.residuals.passed(), "{}", e.report.residuals);
        assert!(e.report.prob_negative > 0.0 && e.report.prob_zero > 0.0);
    }
}
