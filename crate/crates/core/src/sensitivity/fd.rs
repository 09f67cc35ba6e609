use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::SensitivityReport;
use crate::error::{Error, Result};
use crate::market::{MarketTree, OutcomeVector};
use crate::primal_dual::{solve_dual_with, solve_primal_with, PrimalDualSolution, SolverOptions};
use crate::report::ResidualTable;
use crate::utility::UtilitySpec;

/// Relative steps `δ`; the oracle evaluates at `x(1 ± δ)`.
pub const DEFAULT_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub eps: f64,
    /// `u(x+ε) − u(x) − u′(x)ε − ½u″ε²`.
    pub residual: f64,
    /// `residual / ε²`, which must vanish as `ε → 0`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdOracle {
    pub steps: Vec<f64>,
    /// Raw central second differences of `u`, one per step.
    pub u2_raw: Vec<f64>,
    pub u2_fd: f64,
    /// Size of the last Richardson correction.
    pub u2_error: f64,
    /// Successive raw differences shrink; otherwise solver noise dominates.
    pub monotone: bool,
    pub xp_fd: OutcomeVector<f64>,
    /// Present when the dual ladder was run.
    pub yp_fd: Option<OutcomeVector<f64>>,
    pub expansion: Vec<ExpansionPoint>,
    /// Fitted `ε`-exponent of the expansion residual (3 for smooth `u`).
    pub expansion_order: f64,
}

/// Repeated Richardson extrapolation for an `h²` error expansion and step
/// ratio 2. Returns the last diagonal entry and the last correction.
pub fn richardson(values: &[f64]) -> (f64, f64) {
    let mut row = values.to_vec();
    let mut correction = f64::INFINITY;
    let mut factor = 4.0;
    while row.len() > 1 {
        let next: Vec<f64> = row.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
        correction = (next[next.len() - 1] - row[row.len() - 1]).abs();
        row = next;
        factor *= 4.0;
    }
    (row[0], correction)
}

fn leafwise<T: Fn(&PrimalDualSolution) -> OutcomeVector<f64>>(
    plus: &[PrimalDualSolution],
    minus: &[PrimalDualSolution],
    steps: &[f64],
    scale: f64,
    terminal: T,
) -> OutcomeVector<f64> {
    let quotients: Vec<OutcomeVector<f64>> = plus
        .iter()
        .zip(minus)
        .zip(steps)
        .map(|((p, m), d)| terminal(p).zip_with(&terminal(m), |a, b| (a - b) / (2.0 * d * scale)))
        .collect();
    let n = quotients[0].len();
    OutcomeVector::new((0..n).map(|k| richardson(&quotients.iter().map(|q| q.values[k]).collect::<Vec<_>>()).0).collect())
}

/// Finite-difference cross-check of the second-order quantities around an
/// interior optimum. Ladder solves run concurrently; results are assembled
/// in ladder order. The dual ladder (for `Y′`) costs a root-find per step
/// and is skipped unless `dual` is set.
pub fn fd_oracle(
    tree: &MarketTree<f64>,
    util: &UtilitySpec,
    sol: &PrimalDualSolution,
    u2: f64,
    ladder: &[f64],
    dual: bool,
) -> Result<FdOracle> {
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::Precondition("ladder must be strictly decreasing steps in (0, 1)".into()));
    }
    let (x, y) = (sol.x, sol.y);
    let warm = SolverOptions { warm_start: Some(sol.strategy.coordinates(tree)), ..SolverOptions::tight() };
    let centre = solve_primal_with(tree, util, x, &warm)?;
    let signed: Vec<f64> = ladder.iter().flat_map(|d| [*d, -*d]).collect();
    let primal: Vec<PrimalDualSolution> =
        signed.par_iter().map(|d| solve_primal_with(tree, util, x * (1.0 + d), &warm)).collect::<Result<_>>()?;
    let duals: Vec<PrimalDualSolution> = if dual {
        signed
            .par_iter()
            .map(|d| solve_dual_with(tree, util, y * (1.0 + d), &SolverOptions::tight()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    if let Some(s) = primal.iter().chain(&duals).find(|s| !s.interior) {
        return Err(Error::NotInterior(format!("ladder solve at x = {} is not interior", s.x)));
    }
    let (plus, minus): (Vec<_>, Vec<_>) = primal.chunks(2).map(|c| (c[0].clone(), c[1].clone())).unzip();

    let u2_raw: Vec<f64> = plus
        .iter()
        .zip(&minus)
        .zip(ladder)
        .map(|((p, m), d)| (p.u - 2.0 * centre.u + m.u) / (d * x).powi(2))
        .collect();
    let (u2_fd, u2_error) = richardson(&u2_raw);
    let monotone = u2_raw.windows(3).all(|w| (w[2] - w[1]).abs() < (w[1] - w[0]).abs());

    let xp_fd = leafwise(&plus, &minus, ladder, x, |s| s.terminal_wealth(tree));
    let yp_fd = dual.then(|| {
        let (dplus, dminus): (Vec<_>, Vec<_>) = duals.chunks(2).map(|c| (c[0].clone(), c[1].clone())).unzip();
        leafwise(&dplus, &dminus, ladder, y, |s| s.terminal_deflator(tree))
    });

    let mut expansion = Vec::with_capacity(2 * ladder.len());
    for (s, d) in primal.iter().zip(&signed) {
        let eps = d * x;
        let residual = s.u - centre.u - centre.u1 * eps - 0.5 * u2 * eps * eps;
        expansion.push(ExpansionPoint { eps, residual, ratio: residual / (eps * eps) });
    }
    let pts: Vec<(f64, f64)> = expansion
        .iter()
        .filter(|e| e.eps > 0.0 && e.residual != 0.0)
        .map(|e| (e.eps.ln(), e.residual.abs().ln()))
        .collect();
    let expansion_order = log_log_slope(&pts).unwrap_or(f64::NAN);

    Ok(FdOracle { steps: ladder.to_vec(), u2_raw, u2_fd, u2_error, monotone, xp_fd, yp_fd, expansion, expansion_order })
}

/// Least-squares slope of `(ln a, ln b)` pairs.
pub fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Agreement of the engine with the oracle at the default thresholds.
pub fn oracle_agreement(tree: &MarketTree<f64>, report: &SensitivityReport, fd: &FdOracle) -> ResidualTable {
    let mut t = ResidualTable::new();
    let rel = (report.u2 - fd.u2_fd).abs() / report.u2.abs();
    t.at_most("u2", rel, (1e-4f64).max(fd.u2_error / report.u2.abs()));
    let xp = report.xp_terminal(tree);
    let worst = |a: &OutcomeVector<f64>, b: &OutcomeVector<f64>| {
        a.values.iter().zip(&b.values).map(|(p, q)| (p - q).abs() / (1.0 + p.abs())).fold(0.0, f64::max)
    };
    t.at_most("xp_terminal", worst(&xp, &fd.xp_fd), 1e-3);
    if let Some(fy) = &fd.yp_fd {
        t.at_most("yp_terminal", worst(&report.yp_terminal(tree), fy), 1e-3);
    }
    let small = fd.expansion.iter().filter(|e| e.eps.abs() <= fd.steps[fd.steps.len() - 1] * report.x * 1.0001);
    let ratio = small.map(|e| e.ratio.abs()).fold(0.0, f64::max);
    t.at_most("expansion_ratio", ratio / report.u2.abs(), 1e-2);
    t.note("richardson_monotone", if fd.monotone { 1.0 } else { 0.0 });
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |h: f64| 2.0 + 3.0 * h * h + 5.0 * h.powi(4);
        let (v, _) = richardson(&[f(0.1), f(0.05), f(0.025)]);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn slope_of_cubic() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|x: &f64| (x.ln(), (x.powi(3)).ln())).collect();
        assert!((log_log_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
    }
}
