//! Seeds that once tripped the local martingale search or the Newton
//! stopping rules.

use curvature::market::{random_tree_seeded, RandomTreeConfig};
use curvature::primal_dual::{solve_primal, solve_primal_with, SolverOptions};
use curvature::sensitivity::{fd_oracle, sensitivity, DEFAULT_LADDER};
use curvature::utility::UtilitySpec;

#[test]
fn ill_conditioned_nodes_have_martingale_measures() {
    // nearly collinear increments, roundoff-level independence, large dual
    for seed in [14079, 777258, 5000035] {
        let tree = random_tree_seeded(seed, &RandomTreeConfig::default());
        let q = tree.find_martingale_measure().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(q.leaf_prob.iter().all(|v| *v > 0.0));
    }
}

#[test]
fn low_weight_node_converges() {
    let tree = random_tree_seeded(40, &RandomTreeConfig::default());
    let util = UtilitySpec::blend(vec![(1.0, 0.5), (1.0, 1.5), (0.5, 4.0)]);
    let sol = solve_primal(&tree, &util, 1.0).unwrap();
    assert!(sol.interior && sol.foc_residual < 1e-12);
}

#[test]
fn small_marginal_utility_converges() {
    let cfg = RandomTreeConfig { periods: (1, 2), ..RandomTreeConfig::default() };
    let tree = random_tree_seeded(651, &cfg);
    let sol = solve_primal(&tree, &UtilitySpec::power(5.3995672624626145), 4.625370087705376).unwrap();
    assert!(sol.interior);
}

#[test]
fn warm_started_ladder_is_interior() {
    let tree = random_tree_seeded(12528, &RandomTreeConfig::default());
    let util = UtilitySpec::log();
    let sol = solve_primal(&tree, &util, 1.0).unwrap();
    let warm = SolverOptions { warm_start: Some(sol.strategy.coordinates(&tree)), ..SolverOptions::tight() };
    for x in [0.9975, 1.0025] {
        assert!(solve_primal_with(&tree, &util, x, &warm).unwrap().interior);
    }
    let rep = sensitivity(&tree, &util, &sol).unwrap();
    assert!(fd_oracle(&tree, &util, &sol, rep.u2, &DEFAULT_LADDER, false).is_ok());
}
