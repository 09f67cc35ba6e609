use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{solve_primal_with, PrimalDualSolution, SolverOptions};
use crate::error::Result;
use crate::market::MarketTree;
use crate::report::ResidualTable;
use crate::utility::{conjugate, UtilitySpec};

/// Optimality, duality and martingale residuals of a solution.
pub fn first_order_audit(sol: &PrimalDualSolution, tree: &MarketTree<f64>, util: &UtilitySpec) -> Result<ResidualTable> {
    let mut t = ResidualTable::new();
    let pm = tree.physical_measure();
    let xt = sol.terminal_wealth(tree);
    let yt = sol.terminal_deflator(tree);
    let (x, y) = (sol.x, sol.y);

    // optimality in every gain direction; one-sided at active constraints
    let active: Vec<bool> = xt.values.iter().map(|v| *v <= 1e-8 * x).collect();
    let mut foc = 0.0f64;
    for col in tree.terminal_gain_span() {
        let mut e = 0.0;
        let mut scale = 0.0;
        for ((p, yk), g) in pm.leaf_prob.iter().zip(&yt.values).zip(&col.outcome.values) {
            e += p * yk * g;
            scale += p * yk * g.abs();
        }
        if scale == 0.0 {
            continue;
        }
        let rel = e / scale;
        let up_ok = col.outcome.values.iter().zip(&active).all(|(g, a)| !a || *g >= 0.0);
        let down_ok = col.outcome.values.iter().zip(&active).all(|(g, a)| !a || *g <= 0.0);
        let viol = match (up_ok, down_ok) {
            (true, true) => rel.abs(),
            (true, false) => rel.max(0.0),
            (false, true) => (-rel).max(0.0),
            (false, false) => 0.0,
        };
        foc = foc.max(viol);
    }
    t.at_most("foc.gain_directions", foc, 1e-9);

    // E[Y_child (S_child − S_node) | node] = 0 and the ℙ-supermartingale property of Y
    let mut mart = 0.0f64;
    let mut supermart = 0.0f64;
    for n in tree.interior_nodes() {
        let node = tree.node(n);
        let yn = sol.deflator.values[n];
        let mut ey = 0.0;
        let mut drift = vec![0.0; tree.n_assets()];
        let mut scale = vec![0.0; tree.n_assets()];
        for &c in &node.children {
            let child = tree.node(c);
            let yc = sol.deflator.values[c];
            ey += child.prob * yc;
            for j in 0..tree.n_assets() {
                let ds = child.prices[j] - node.prices[j];
                drift[j] += child.prob * yc * ds;
                scale[j] += child.prob * yc * ds.abs();
            }
        }
        for j in 0..tree.n_assets() {
            if scale[j] > 0.0 {
                mart = mart.max(drift[j].abs() / scale[j]);
            }
        }
        supermart = supermart.max((ey - yn) / yn);
    }
    t.at_most("foc.deflated_price_martingale", mart, 1e-9);
    t.at_most("deflator.supermartingale", supermart, 1e-9);
    if sol.interior {
        let mut eq = 0.0f64;
        for n in tree.interior_nodes() {
            let node = tree.node(n);
            let ey: f64 = node.children.iter().map(|&c| tree.node(c).prob * sol.deflator.values[c]).sum();
            eq = eq.max((ey / sol.deflator.values[n] - 1.0).abs());
        }
        t.at_most("deflator.martingale", eq, 1e-9);
    }

    let mut leafwise = 0.0f64;
    let mut v_sum = 0.0;
    for ((p, xk), yk) in pm.leaf_prob.iter().zip(&xt.values).zip(&yt.values) {
        leafwise = leafwise.max((util.u1(*xk)? - yk).abs() / yk);
        v_sum += p * conjugate(util, *yk)?.v;
    }
    t.at_most("marginal_equals_deflator", leafwise, 1e-12);
    let exy = pm.expectation(&xt.zip_with(&yt, |a, b| a * b));
    t.at_most("product_mean", (exy - x * y).abs() / (x * y), 1e-10);
    t.at_most("conjugacy", (sol.u - x * y - v_sum).abs() / (1.0 + sol.u.abs()), 1e-9);
    t.at_most("dual_slope", (sol.v1 + x).abs() / x, 1e-15);
    t.below("min_terminal_wealth", -xt.values.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve {
    /// `(x, u(x), u′(x))` in grid order.
    pub samples: Vec<(f64, f64, f64)>,
    /// `u` increasing and `u′` decreasing along the sorted grid.
    pub monotone: bool,
}

/// One independent solve per capital, run in parallel.
pub fn value_curve(tree: &MarketTree<f64>, util: &UtilitySpec, grid: &[f64]) -> Result<ValueCurve> {
    let samples = grid
        .par_iter()
        .map(|&x| {
            let s = solve_primal_with(tree, util, x, &SolverOptions::default())?;
            Ok((x, s.u, s.u1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let monotone = sorted.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].2 <= w[0].2);
    Ok(ValueCurve { samples, monotone })
}
