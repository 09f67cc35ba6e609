use serde::{Deserialize, Serialize};

use super::subspace::{centered_span, inner, orthocomplement, quad_project, SubspaceBasis};
use crate::error::{Error, Result};
use crate::market::{AdaptedProcess, MarketTree, Measure, OutcomeVector};
use crate::numerics::linalg::rank;
use crate::primal_dual::PrimalDualSolution;
use crate::report::ResidualTable;
use crate::utility::{conjugate, rra, UtilitySpec};

/// Relative tolerance for dropping dependent gain directions.
pub const BASIS_TOL: f64 = 1e-10;

/// `dR/dP = X_T Y_T / (xy)` together with its normalisation residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMeasure {
    pub measure: Measure<f64>,
    pub sum_residual: f64,
}

pub fn risk_measure(tree: &MarketTree<f64>, sol: &PrimalDualSolution) -> Result<RiskMeasure> {
    if !sol.interior {
        return Err(Error::NotInterior("risk measure needs an interior optimum".into()));
    }
    let xt = sol.terminal_wealth(tree);
    let yt = sol.terminal_deflator(tree);
    let xy = sol.x * sol.y;
    let w: Vec<f64> = tree
        .physical_measure()
        .leaf_prob
        .iter()
        .zip(xt.values.iter().zip(&yt.values))
        .map(|(p, (a, b))| p * a * b / xy)
        .collect();
    let total: f64 = w.iter().sum();
    Ok(RiskMeasure { measure: Measure::new(w), sum_residual: (total - 1.0).abs() })
}

/// Orthonormal basis of the terminal values of gains in units of `X(x)`,
/// plus the largest `E_R`-mean removed by centring (zero in exact
/// arithmetic, since `E[Y_T G_T] = 0`).
pub fn gain_subspace(
    tree: &MarketTree<f64>,
    sol: &PrimalDualSolution,
    r: &RiskMeasure,
) -> Result<(SubspaceBasis<f64>, f64)> {
    if !sol.interior {
        return Err(Error::NotInterior("gain subspace needs an interior optimum".into()));
    }
    let xt = sol.terminal_wealth(tree);
    let one = OutcomeVector::constant(tree.n_leaves(), 1.0);
    let mut centering = 0.0f64;
    let vectors: Vec<OutcomeVector<f64>> = tree
        .terminal_gain_span()
        .into_iter()
        .map(|g| {
            let v = g.outcome.zip_with(&xt, |a, b| a / b);
            let norm = inner(&r.measure, &v, &v).sqrt();
            if norm > 0.0 {
                centering = centering.max(inner(&r.measure, &v, &one).abs() / norm);
            }
            v
        })
        .collect();
    Ok((centered_span(&vectors, &r.measure, BASIS_TOL).normalized(), centering))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
    /// Leafwise relative risk aversion `A(X_T)`.
    pub zeta: OutcomeVector<f64>,
    /// Leafwise relative risk tolerance `B(Y_T)`.
    pub eta: OutcomeVector<f64>,
    pub alpha_hat: OutcomeVector<f64>,
    pub beta_hat: OutcomeVector<f64>,
    pub m_proc: AdaptedProcess<f64>,
    pub n_proc: AdaptedProcess<f64>,
    /// `X′(x)` at every node.
    pub xp: AdaptedProcess<f64>,
    /// `Y′(y)` at every node.
    pub yp: AdaptedProcess<f64>,
    pub u2: f64,
    pub v2: f64,
    pub dim_gain: usize,
    pub dim_complement: usize,
    pub risk_measure: Measure<f64>,
    pub residuals: ResidualTable,
}

impl SensitivityReport {
    pub fn xp_terminal(&self, tree: &MarketTree<f64>) -> OutcomeVector<f64> {
        tree.terminal(&self.xp)
    }

    pub fn yp_terminal(&self, tree: &MarketTree<f64>) -> OutcomeVector<f64> {
        tree.terminal(&self.yp)
    }
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Second-order sensitivities at an interior optimum, with every identity
/// recorded as a named residual.
pub fn sensitivity(tree: &MarketTree<f64>, util: &UtilitySpec, sol: &PrimalDualSolution) -> Result<SensitivityReport> {
    if !sol.interior {
        return Err(Error::NotInterior(format!(
            "first-order residual {:e}; the projection machinery needs an interior optimum",
            sol.foc_residual
        )));
    }
    let (x, y) = (sol.x, sol.y);
    let (c1, c2) = util.corridor;
    let pm = tree.physical_measure();
    let xt = sol.terminal_wealth(tree);
    let yt = sol.terminal_deflator(tree);
    let mut res = ResidualTable::new();

    let zeta = OutcomeVector::new(xt.values.iter().map(|v| rra(util, *v)).collect::<Result<Vec<_>>>()?);
    let conj: Vec<_> = yt.values.iter().map(|v| conjugate(util, *v)).collect::<Result<Vec<_>>>()?;
    let eta = OutcomeVector::new(conj.iter().map(|c| c.rrt()).collect());
    if let Some(z) = zeta.values.iter().find(|z| !(**z > c1 && **z < c2)) {
        return Err(Error::Corridor(format!("risk aversion {z} at the optimum leaves ({c1}, {c2})")));
    }
    res.at_most("zeta_eta", max_abs(zeta.values.iter().zip(&eta.values).map(|(a, b)| a * b - 1.0)), 1e-12);

    let r = risk_measure(tree, sol)?;
    res.at_most("risk_measure.sum", r.sum_residual, 1e-12);
    let (basis_a, centering) = gain_subspace(tree, sol, &r)?;
    res.at_most("gain_subspace.centering", centering, 1e-8);
    let basis_b = orthocomplement(&basis_a, BASIS_TOL).normalized();
    let dims = basis_a.dim() + basis_b.dim();
    res.at_most("complement.dimension_defect", (dims as f64 - (tree.n_leaves() - 1) as f64).abs(), 0.0);
    res.at_most("complement.mean", basis_b.max_mean(), 1e-12);

    let pa = quad_project(&basis_a, &zeta)?;
    let pb = quad_project(&basis_b, &eta)?;
    let (a, b) = (pa.value, pb.value);
    let alpha = pa.optimizer;
    let beta = pb.optimizer;

    let rm = &r.measure;
    let m_proc = tree.conditional_expectation(&alpha, rm)?;
    let n_proc = tree.conditional_expectation(&beta, rm)?;
    let xp = AdaptedProcess::new(
        sol.wealth.values.iter().zip(&m_proc.values).map(|(w, m)| w / x * (1.0 + m)).collect(),
    );
    let yp = AdaptedProcess::new(
        sol.deflator.values.iter().zip(&n_proc.values).map(|(d, n)| d / y * (1.0 + n)).collect(),
    );
    let u2 = -(sol.u1 / x) * a;
    let v2 = -(sol.v1 / y) * b;

    res.at_most("reciprocity", (a * b - 1.0).abs(), 1e-10);
    res.below("corridor.a", (c1 - a).max(a - c2), 0.0);
    res.below("corridor.b", (1.0 / c2 - b).max(b - 1.0 / c1), 0.0);
    let prop = max_abs(
        zeta.values
            .iter()
            .zip(&alpha.values)
            .zip(beta.values.iter())
            .map(|((z, al), be)| (z * (1.0 + al) - a * (1.0 + be)) / a),
    );
    res.at_most("proportionality", prop, 1e-10);

    let xpt = tree.terminal(&xp);
    let ypt = tree.terminal(&yp);
    let mut e_u = 0.0;
    let mut e_v = 0.0;
    let mut cross = 0.0f64;
    let mut cross_scale = 0.0f64;
    for k in 0..tree.n_leaves() {
        let p = pm.leaf_prob[k];
        let u2k = util.u2(xt.values[k])?;
        e_u += p * u2k * xpt.values[k] * xpt.values[k];
        e_v += p * conj[k].v2 * ypt.values[k] * ypt.values[k];
        cross = cross.max((u2k * xpt.values[k] - u2 * ypt.values[k]).abs());
        cross_scale = cross_scale.max((u2 * ypt.values[k]).abs());
    }
    res.at_most("second_derivative.u", (u2 - e_u).abs() / u2.abs(), 1e-9);
    res.at_most("second_derivative.v", (v2 - e_v).abs() / v2.abs(), 1e-9);
    res.at_most("cross", cross / cross_scale, 1e-9);
    res.at_most("conjugate_curvature", (u2 * v2 + 1.0).abs(), 1e-9);

    let one = OutcomeVector::constant(tree.n_leaves(), 1.0);
    let na = inner(rm, &alpha, &alpha).sqrt();
    let nb = inner(rm, &beta, &beta).sqrt();
    res.at_most("orthogonality.alpha_mean", inner(rm, &alpha, &one).abs() / (1.0 + na), 1e-10);
    res.at_most("orthogonality.beta_mean", inner(rm, &beta, &one).abs() / (1.0 + nb), 1e-10);
    res.at_most("orthogonality.alpha_beta", inner(rm, &alpha, &beta).abs() / (1.0 + na * nb), 1e-10);
    if let Some(gamma) = util.constant_rra() {
        res.at_most("constant_rra.alpha_hat", max_abs(alpha.values.iter().copied()), 1e-12);
        res.at_most("constant_rra.a", (a - gamma).abs() / gamma, 1e-12);
    }
    res.note("alpha_hat.max", max_abs(alpha.values.iter().copied()));
    res.note("beta_hat.max", max_abs(beta.values.iter().copied()));

    let report = SensitivityReport {
        x,
        y,
        a,
        b,
        zeta,
        eta,
        alpha_hat: alpha,
        beta_hat: beta,
        m_proc,
        n_proc,
        xp,
        yp,
        u2,
        v2,
        dim_gain: basis_a.dim(),
        dim_complement: basis_b.dim(),
        risk_measure: r.measure,
        residuals: res,
    };
    let audit = martingale_audit(tree, sol, &report);
    let mut report = report;
    report.residuals.merge("martingale", &audit);
    Ok(report)
}

/// ℙ-martingale residuals of `X Y′`, `X′ Y` and `X′ Y′`, node by node,
/// relative to the largest value of each product.
pub fn martingale_audit(tree: &MarketTree<f64>, sol: &PrimalDualSolution, report: &SensitivityReport) -> ResidualTable {
    let pm = tree.physical_measure();
    let mut t = ResidualTable::new();
    let products = [
        ("x_yp", &sol.wealth, &report.yp),
        ("xp_y", &report.xp, &sol.deflator),
        ("xp_yp", &report.xp, &report.yp),
    ];
    for (name, a, b) in products {
        let z = a.zip_with(b, |p, q| p * q);
        let scale = max_abs(z.values.iter().copied()).max(f64::MIN_POSITIVE);
        t.at_most(name, tree.martingale_defect(&z, &pm) / scale, 1e-9);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRank {
    pub node: u64,
    pub children: usize,
    /// Rank of the one-step increments of `(1/X, S/X)`.
    pub rank_numeraire: usize,
    /// Rank of the one-step increments of `S`.
    pub rank_original: usize,
    /// The original assets have linearly dependent increments.
    pub redundant: bool,
    /// Increments of the new model span less than those of the original.
    pub degenerate: bool,
}

pub fn numeraire_rank_report(tree: &MarketTree<f64>, sol: &PrimalDualSolution) -> Result<Vec<NodeRank>> {
    let sx = tree.numeraire_change(&sol.wealth)?;
    let d = tree.n_assets();
    Ok(tree
        .interior_nodes()
        .map(|n| {
            let node = tree.node(n);
            let inc = |m: &MarketTree<f64>| -> Vec<Vec<f64>> {
                let base = &m.node(n).prices;
                node.children
                    .iter()
                    .map(|&c| m.node(c).prices.iter().zip(base).map(|(a, b)| a - b).collect())
                    .collect()
            };
            let rank_numeraire = rank(&inc(&sx), 1e-12);
            let rank_original = rank(&inc(tree), 1e-12);
            NodeRank {
                node: node.id,
                children: node.children.len(),
                rank_numeraire,
                rank_original,
                redundant: rank_original < d,
                degenerate: rank_numeraire < rank_original,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primal_dual::solve_primal;
    use crate::sensitivity::fd::{fd_oracle, oracle_agreement, DEFAULT_LADDER};

    fn trinomial() -> MarketTree<f64> {
        MarketTree::one_period(
            vec!["S".into()],
            vec![1.0],
            vec![(0.3, vec![1.3]), (0.4, vec![1.05]), (0.3, vec![0.8])],
        )
        .unwrap()
    }

    #[test]
    fn power_utility_collapses() {
        let tree = MarketTree::<f64>::binomial(1.0, 1.2, 0.9, 0.6, 2).unwrap();
        let u = UtilitySpec::power(2.0);
        let sol = solve_primal(&tree, &u, 1.0).unwrap();
        let r = sensitivity(&tree, &u, &sol).unwrap();
        assert!((r.a - 2.0).abs() < 1e-12 && (r.b - 0.5).abs() < 1e-12);
        assert!(r.alpha_hat.values.iter().all(|v| v.abs() < 1e-12));
        assert!(r.beta_hat.values.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(r.dim_complement, 0);
        assert!(r.residuals.passed(), "{}", r.residuals);
        for (xp, w) in r.xp.values.iter().zip(&sol.wealth.values) {
            assert!((xp - w).abs() < 1e-12);
        }
    }

    #[test]
    fn log_utility_risk_measure_is_physical() {
        let tree = trinomial();
        let sol = solve_primal(&tree, &UtilitySpec::log(), 2.0).unwrap();
        let r = risk_measure(&tree, &sol).unwrap();
        for (a, b) in r.measure.leaf_prob.iter().zip(&tree.physical_measure().leaf_prob) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trinomial_blend_matches_oracle() {
        let tree = trinomial();
        let u = UtilitySpec::blend(vec![(1.0, 0.5), (2.0, 3.0)]);
        let sol = solve_primal(&tree, &u, 1.0).unwrap();
        let r = sensitivity(&tree, &u, &sol).unwrap();
        assert_eq!((r.dim_gain, r.dim_complement), (1, 1));
        assert!(r.residuals.passed(), "{}", r.residuals);
        assert!(r.a > 0.5 && r.a < 3.0);
        let fd = fd_oracle(&tree, &u, &sol, r.u2, &DEFAULT_LADDER, true).unwrap();
        let agree = oracle_agreement(&tree, &r, &fd);
        assert!(agree.passed(), "{agree}");
        assert!((fd.expansion_order - 3.0).abs() < 0.3, "{}", fd.expansion_order);
    }

    #[test]
    fn non_interior_is_refused() {
        let tree = trinomial();
        let mut sol = solve_primal(&tree, &UtilitySpec::log(), 1.0).unwrap();
        sol.interior = false;
        assert!(matches!(sensitivity(&tree, &UtilitySpec::log(), &sol), Err(Error::NotInterior(_))));
    }

    #[test]
    fn ranks_under_numeraire() {
        let tree = MarketTree::<f64>::binomial(1.0, 1.1, 0.95, 0.5, 1).unwrap();
        let sol = solve_primal(&tree, &UtilitySpec::log(), 1.0).unwrap();
        let ranks = numeraire_rank_report(&tree, &sol).unwrap();
        assert_eq!(ranks.len(), 1);
        assert_eq!((ranks[0].rank_numeraire, ranks[0].rank_original), (1, 1));
        assert!(!ranks[0].redundant && !ranks[0].degenerate);

        let dup = MarketTree::one_period(
            vec!["A".into(), "B".into()],
            vec![1.0, 1.0],
            vec![(0.5, vec![1.1, 1.1]), (0.5, vec![0.95, 0.95])],
        )
        .unwrap();
        let sol = solve_primal(&dup, &UtilitySpec::log(), 1.0).unwrap();
        let r = &numeraire_rank_report(&dup, &sol).unwrap()[0];
        assert_eq!(r.rank_numeraire, 1);
        assert!(r.redundant);
    }
}
