use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{AdaptedProcess, MarketTree, Measure, OutcomeVector, PredictableStrategy};
use crate::numerics::linalg::solve_psd;
use crate::numerics::roots::brent;
use crate::utility::{conjugate, UtilitySpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when `‖∇‖∞ ≤ tol · E[U′(X_T)·|gain|]`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial strategy coordinates (interior node, then asset).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 200, warm_start: None }
    }
}

impl SolverOptions {
    pub fn tight() -> Self {
        Self { tol: 1e-13, ..Self::default() }
    }
}

/// Optimal wealth and deflator processes at one point of the value curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualSolution {
    pub x: f64,
    pub y: f64,
    pub strategy: PredictableStrategy<f64>,
    /// Optimal wealth `X(x)` at every node.
    pub wealth: AdaptedProcess<f64>,
    /// Dual optimiser `Y(y)` at every node.
    pub deflator: AdaptedProcess<f64>,
    pub u: f64,
    pub u1: f64,
    pub v: f64,
    pub v1: f64,
    pub interior: bool,
    /// Largest relative first-order residual over the gain directions.
    pub foc_residual: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl PrimalDualSolution {
    pub fn terminal_wealth(&self, tree: &MarketTree<f64>) -> OutcomeVector<f64> {
        tree.terminal(&self.wealth)
    }

    pub fn terminal_deflator(&self, tree: &MarketTree<f64>) -> OutcomeVector<f64> {
        tree.terminal(&self.deflator)
    }

    /// Builds the solution fields for a given strategy without optimising
    /// (used to audit candidate optimisers).
    pub fn from_strategy(
        tree: &MarketTree<f64>,
        util: &UtilitySpec,
        x: f64,
        strategy: PredictableStrategy<f64>,
    ) -> Result<Self> {
        finish(tree, util, x, strategy, 0, 0.0)
    }
}

/// Leaf-by-column matrix of terminal gains.
pub(crate) fn gain_matrix(tree: &MarketTree<f64>) -> Vec<Vec<f64>> {
    let cols = tree.terminal_gain_span();
    (0..tree.n_leaves()).map(|k| cols.iter().map(|c| c.outcome.values[k]).collect()).collect()
}

fn expected_utility(util: &UtilitySpec, p: &[f64], xt: &[f64]) -> Result<f64> {
    let mut u = 0.0;
    for (pk, xk) in p.iter().zip(xt) {
        u += pk * util.u(*xk)?;
    }
    Ok(u)
}

/// Maximises `E[U(X_T)]` over predictable strategies keeping wealth positive.
pub fn solve_primal(tree: &MarketTree<f64>, util: &UtilitySpec, x: f64) -> Result<PrimalDualSolution> {
    solve_primal_with(tree, util, x, &SolverOptions::default())
}

pub fn solve_primal_with(
    tree: &MarketTree<f64>,
    util: &UtilitySpec,
    x: f64,
    opts: &SolverOptions,
) -> Result<PrimalDualSolution> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Precondition(format!("initial capital must be positive, got {x}")));
    }
    tree.find_martingale_measure()?;
    util.check_domain(x)?;
    let p = tree.physical_measure().leaf_prob;
    let g = gain_matrix(tree);
    let m = g.first().map_or(0, |r| r.len());
    let mut h = match &opts.warm_start {
        Some(w) if w.len() == m => w.clone(),
        _ => vec![0.0; m],
    };
    let terminal = |h: &[f64]| -> Vec<f64> {
        g.iter().map(|row| x + row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()).collect()
    };
    let node_wealth = |h: &[f64]| tree.wealth_process(x, &PredictableStrategy::from_coordinates(tree, h)).values;
    if node_wealth(&h).iter().any(|w| !(*w > 0.0)) {
        h = vec![0.0; m];
    }
    let mut xt = terminal(&h);
    let mut f = match expected_utility(util, &p, &xt) {
        Ok(f) => f,
        Err(_) if opts.warm_start.is_some() => {
            h = vec![0.0; m];
            xt = terminal(&h);
            expected_utility(util, &p, &xt)?
        }
        Err(e) => return Err(e),
    };
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    let mut stalls = 0;
    let mut tol_scale = 1.0;
    while iterations < opts.max_iter {
        let mut grad = vec![0.0; m];
        let mut hess = vec![vec![0.0; m]; m];
        // gradient and objective scales: E[U′·|gain|] and x·E[U′]
        let (mut gscale, mut vscale) = (0.0, 0.0);
        for (k, row) in g.iter().enumerate() {
            let (u1, u2) = util.marginals(xt[k])?;
            let (a, b) = (p[k] * u1, -p[k] * u2);
            gscale += a * row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            vscale += a * x;
            for i in 0..m {
                if row[i] == 0.0 {
                    continue;
                }
                grad[i] += a * row[i];
                for j in 0..m {
                    hess[i][j] += b * row[i] * row[j];
                }
            }
        }
        grad_norm = grad.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        let gscale = if gscale > 0.0 { gscale } else { vscale };
        tol_scale = gscale;
        if grad_norm <= opts.tol * gscale {
            break;
        }
        iterations += 1;
        // diagonal scaling keeps low-probability nodes above the pivot cutoff
        let scale: Vec<f64> = (0..m).map(|i| if hess[i][i] > 0.0 { 1.0 / hess[i][i].sqrt() } else { 1.0 }).collect();
        let scaled: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| hess[i][j] * scale[i] * scale[j]).collect()).collect();
        let rhs: Vec<f64> = grad.iter().zip(&scale).map(|(g, s)| g * s).collect();
        let step: Vec<f64> = solve_psd(&scaled, &rhs, 1e-13).x.iter().zip(&scale).map(|(z, s)| z * s).collect();
        let decrement: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
        if decrement <= 1e-30 * vscale {
            break;
        }
        // the step no longer moves the coordinates: wealth near zero makes
        // the gradient noisy at this level through cancellation
        let h_scale = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if step.iter().all(|s| s.abs() <= 4.0 * f64::EPSILON * h_scale) {
            break;
        }
        // fraction to the boundary on every node wealth
        let w0 = node_wealth(&h);
        let dw: Vec<f64> = {
            let probe: Vec<f64> = h.iter().zip(&step).map(|(a, b)| a + b).collect();
            node_wealth(&probe).iter().zip(&w0).map(|(a, b)| a - b).collect()
        };
        let mut t = 1.0f64;
        for (w, d) in w0.iter().zip(&dw) {
            if *d < 0.0 {
                t = t.min(0.99 * w / -d);
            }
        }
        let roundoff = 1e-15 * (vscale + f.abs());
        // once the predicted gain is near roundoff the objective can no
        // longer rank trial points; the gradient norm is the merit instead
        let flat = 0.5 * t * decrement <= 1e3 * roundoff;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = h.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let xt_trial = terminal(&trial);
            if let Ok(ft) = expected_utility(util, &p, &xt_trial) {
                let progress = if flat {
                    grad_max(util, &p, &g, &xt_trial).ok().filter(|gt| *gt < grad_norm)
                } else {
                    (ft - f >= 1e-4 * t * decrement).then_some(0.0)
                };
                if let Some(gt) = progress {
                    stalls = if flat && gt > 0.5 * grad_norm { stalls + 1 } else { 0 };
                    h = trial;
                    xt = xt_trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if accepted && stalls >= 3 && grad_norm <= 1e-7 * gscale {
            break;
        }
        if !accepted {
            // no trial improves either merit: the gradient is at its noise
            // floor, acceptable only if small on the scale of the objective
            if grad_norm <= 1e-7 * gscale {
                break;
            }
            // the Newton decrement bounds the remaining gain in u
            if decrement <= 1e-12 * vscale {
                break;
            }
            return Err(Error::NonConvergence { iterations, grad_norm });
        }
    }
    if iterations >= opts.max_iter && !(grad_norm <= opts.tol * tol_scale) {
        return Err(Error::NonConvergence { iterations, grad_norm });
    }
    let strategy = PredictableStrategy::from_coordinates(tree, &h);
    finish(tree, util, x, strategy, iterations, grad_norm)
}

fn grad_max(util: &UtilitySpec, p: &[f64], g: &[Vec<f64>], xt: &[f64]) -> Result<f64> {
    let m = g.first().map_or(0, |r| r.len());
    let mut grad = vec![0.0; m];
    for (k, row) in g.iter().enumerate() {
        let a = p[k] * util.u1(xt[k])?;
        for (gi, r) in grad.iter_mut().zip(row) {
            *gi += a * r;
        }
    }
    Ok(grad.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

fn finish(
    tree: &MarketTree<f64>,
    util: &UtilitySpec,
    x: f64,
    strategy: PredictableStrategy<f64>,
    iterations: usize,
    grad_norm: f64,
) -> Result<PrimalDualSolution> {
    let pm = tree.physical_measure();
    let wealth = tree.wealth_process(x, &strategy);
    let xt = tree.terminal(&wealth);
    if let Some(k) = xt.values.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotInterior(format!("terminal wealth {} at leaf {k}", xt.values[k])));
    }
    let mut u = 0.0;
    let mut yt = Vec::with_capacity(xt.len());
    for (pk, xk) in pm.leaf_prob.iter().zip(&xt.values) {
        let vals = util.eval(*xk)?;
        u += pk * vals.u;
        yt.push(vals.u1);
    }
    let yt = OutcomeVector::new(yt);
    let xy = xt.zip_with(&yt, |a, b| a * b);
    let u1 = pm.expectation(&xy) / x;
    let y = u1;
    let cond = tree.conditional_expectation(&xy, &pm)?;
    let deflator = AdaptedProcess::new(cond.values.iter().zip(&wealth.values).map(|(c, w)| c / w).collect());
    let mut v = 0.0;
    for (pk, yk) in pm.leaf_prob.iter().zip(&yt.values) {
        v += pk * conjugate(util, *yk)?.v;
    }
    let foc_residual = foc_residual(tree, &pm, &yt);
    let min_x = xt.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let interior = min_x > 1e-8 * x && foc_residual < 1e-8;
    Ok(PrimalDualSolution {
        x,
        y,
        strategy,
        wealth,
        deflator,
        u,
        u1,
        v,
        v1: -x,
        interior,
        foc_residual,
        iterations,
        grad_norm,
    })
}

/// `max |E[U′(X_T) G]| / E[U′(X_T) |G|]` over the spanning gain vectors.
fn foc_residual(tree: &MarketTree<f64>, pm: &Measure<f64>, yt: &OutcomeVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for col in tree.terminal_gain_span() {
        let mut e = 0.0;
        let mut scale = 0.0;
        for ((p, y), gk) in pm.leaf_prob.iter().zip(&yt.values).zip(&col.outcome.values) {
            e += p * y * gk;
            scale += p * y * gk.abs();
        }
        if scale > 0.0 {
            worst = worst.max(e.abs() / scale);
        }
    }
    worst
}

/// Finds `x` with `u′(x) = y` by root-finding on `ln u′` over `ln x`, then
/// reports the primal solution from the dual side.
pub fn solve_dual(tree: &MarketTree<f64>, util: &UtilitySpec, y: f64) -> Result<PrimalDualSolution> {
    solve_dual_with(tree, util, y, &SolverOptions::default())
}

pub fn solve_dual_with(
    tree: &MarketTree<f64>,
    util: &UtilitySpec,
    y: f64,
    opts: &SolverOptions,
) -> Result<PrimalDualSolution> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Precondition(format!("dual variable must be positive, got {y}")));
    }
    let ln_y = y.ln();
    let (dlo, dhi) = util.domain;
    let (lmin, lmax) = (dlo.ln().max(-300.0), dhi.ln().min(300.0));
    let phi = |s: f64| -> Result<f64> { Ok(solve_primal_with(tree, util, s.exp(), opts)?.u1.ln() - ln_y) };
    // initial guess from the utility's own marginal, then expand
    let guess = crate::utility::marginal_inverse(util, y).map(|v| v.ln()).unwrap_or(0.0).clamp(lmin, lmax);
    let mut lo = guess;
    let mut hi = guess;
    let mut flo = phi(lo)?;
    let mut fhi = flo;
    let mut width = 0.5;
    for _ in 0..200 {
        if flo >= 0.0 && fhi <= 0.0 {
            break;
        }
        if flo < 0.0 {
            if lo <= lmin {
                return Err(Error::Unreachable(y));
            }
            lo = (lo - width).max(lmin);
            flo = phi(lo)?;
        }
        if fhi > 0.0 {
            if hi >= lmax {
                return Err(Error::Unreachable(y));
            }
            hi = (hi + width).min(lmax);
            fhi = phi(hi)?;
        }
        width *= 2.0;
    }
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(Error::Unreachable(y));
    }
    let s = if flo == 0.0 {
        lo
    } else if fhi == 0.0 {
        hi
    } else {
        brent(phi, lo, hi, 1e-15)?
    };
    solve_primal_with(tree, util, s.exp(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_optimal_binomial() {
        let t = MarketTree::binomial(1.0, 2.0, 0.5, 0.5, 1).unwrap();
        let s = solve_primal(&t, &UtilitySpec::log(), 1.0).unwrap();
        let xt = s.terminal_wealth(&t);
        assert!((xt.values[0] - 1.5).abs() < 1e-12 && (xt.values[1] - 0.75).abs() < 1e-12);
        assert!((s.u1 - 1.0).abs() < 1e-12);
        assert!(s.interior);
    }

    #[test]
    fn deterministic_model_keeps_capital() {
        let t = MarketTree::binomial(1.0, 1.0, 1.0, 0.5, 2).unwrap();
        let u = UtilitySpec::power(2.0);
        let s = solve_primal(&t, &u, 3.0).unwrap();
        assert!(s.wealth.values.iter().all(|w| (*w - 3.0).abs() < 1e-15));
        assert!((s.u - u.u(3.0).unwrap()).abs() < 1e-15);
        let d = solve_dual(&t, &u, u.u1(3.0).unwrap()).unwrap();
        assert!((d.x - 3.0).abs() < 1e-12);
        assert!((d.v - conjugate(&u, d.y).unwrap().v).abs() < 1e-12);
    }

    #[test]
    fn dual_inverts_primal_for_power() {
        let t = MarketTree::binomial(1.0, 1.3, 0.8, 0.6, 2).unwrap();
        let u = UtilitySpec::power(3.0);
        let one = solve_primal(&t, &u, 1.0).unwrap();
        let y = 0.37;
        let d = solve_dual(&t, &u, y).unwrap();
        let expect = (y / one.u1).powf(-1.0 / 3.0);
        assert!((d.x / expect - 1.0).abs() < 1e-10);
        assert_eq!(d.v1, -d.x);
    }
}
