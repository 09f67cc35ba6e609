//! Complete-market oracles computed independently of the engine: the
//! optimum is `X = I(yZ)` with `Z = dQ/dP`, the budget fixes `y = u′(x)`,
//! and differentiating the budget gives `u″ = 1/E[Z²/U″(X)]` and
//! `X′ = Z u″ / U″(X)`.

use curvature::market::MarketTree;
use curvature::primal_dual::solve_primal;
use curvature::sensitivity::sensitivity;
use curvature::utility::UtilitySpec;

struct Oracle {
    u1: f64,
    u2: f64,
    xt: Vec<f64>,
    xp: Vec<f64>,
}

/// Marginal utility of `Σ wᵢ x^{1−γᵢ}/(1−γᵢ)` and its derivative.
fn marginal(terms: &[(f64, f64)], x: f64) -> (f64, f64) {
    terms.iter().fold((0.0, 0.0), |(a, b), (w, g)| (a + w * x.powf(-g), b - w * g * x.powf(-g - 1.0)))
}

fn inverse_marginal(terms: &[(f64, f64)], y: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if marginal(terms, mid).0 > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Leaf probabilities and densities of the binomial lattice.
fn binomial_law(up: f64, down: f64, p: f64, periods: usize) -> (Vec<f64>, Vec<f64>) {
    let q = (1.0 - down) / (up - down);
    let mut law = vec![(1.0, 1.0)];
    for _ in 0..periods {
        law = law.iter().flat_map(|(pp, qq)| [(pp * p, qq * q), (pp * (1.0 - p), qq * (1.0 - q))]).collect();
    }
    (law.iter().map(|l| l.0).collect(), law.iter().map(|l| l.1 / l.0).collect())
}

fn oracle(terms: &[(f64, f64)], probs: &[f64], z: &[f64], x: f64) -> Oracle {
    let budget = |y: f64| probs.iter().zip(z).map(|(p, zk)| p * zk * inverse_marginal(terms, y * zk)).sum::<f64>();
    let (mut lo, mut hi) = (1e-8f64, 1e8f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if budget(mid) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = (lo * hi).sqrt();
    let xt: Vec<f64> = z.iter().map(|zk| inverse_marginal(terms, y * zk)).collect();
    let curv: Vec<f64> = xt.iter().map(|xk| marginal(terms, *xk).1).collect();
    let u2 = 1.0 / probs.iter().zip(z).zip(&curv).map(|((p, zk), c)| p * zk * zk / c).sum::<f64>();
    let xp = z.iter().zip(&curv).map(|(zk, c)| zk * u2 / c).collect();
    Oracle { u1: y, u2, xt, xp }
}

fn check(terms: Vec<(f64, f64)>, up: f64, down: f64, p: f64, periods: usize, x: f64) {
    let tree = MarketTree::binomial(1.0, up, down, p, periods).unwrap();
    let util = UtilitySpec::blend(terms.clone());
    let (probs, z) = binomial_law(up, down, p, periods);
    let o = oracle(&terms, &probs, &z, x);
    let sol = solve_primal(&tree, &util, x).unwrap();
    let rep = sensitivity(&tree, &util, &sol).unwrap();
    assert!((sol.u1 - o.u1).abs() <= 1e-9 * o.u1, "u′ {} vs {}", sol.u1, o.u1);
    assert!((rep.u2 - o.u2).abs() <= 1e-8 * o.u2.abs(), "u″ {} vs {}", rep.u2, o.u2);
    for (a, b) in sol.terminal_wealth(&tree).values.iter().zip(&o.xt) {
        assert!((a - b).abs() <= 1e-9 * b);
    }
    for (a, b) in rep.xp_terminal(&tree).values.iter().zip(&o.xp) {
        assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "X′ {a} vs {b}");
    }
    assert_eq!(rep.dim_complement, 0);
    assert!(rep.residuals.passed(), "{}", rep.residuals);
}

#[test]
fn one_period_power() {
    check(vec![(1.0, 3.0)], 1.25, 0.85, 0.6, 1, 1.0);
}

#[test]
fn three_period_blend() {
    check(vec![(1.0, 0.5), (2.0, 4.0)], 1.15, 0.9, 0.5, 3, 2.0);
}

#[test]
fn two_period_blend_small_capital() {
    check(vec![(0.3, 1.0), (1.0, 2.5)], 1.3, 0.8, 0.45, 2, 0.2);
}

#[test]
fn log_utility_scales_linearly() {
    let tree = MarketTree::binomial(1.0, 1.2, 0.9, 0.55, 2).unwrap();
    let util = UtilitySpec::log();
    for x in [0.5, 1.0, 3.0] {
        let sol = solve_primal(&tree, &util, x).unwrap();
        let rep = sensitivity(&tree, &util, &sol).unwrap();
        assert!((rep.u2 + 1.0 / (x * x)).abs() < 1e-10 / (x * x));
        let xt = sol.terminal_wealth(&tree);
        for (a, b) in rep.xp_terminal(&tree).values.iter().zip(&xt.values) {
            assert!((a - b / x).abs() < 1e-10);
        }
    }
}
