//! Identity battery: random arbitrage-free trees crossed with power and
//! blended power utilities, every sensitivity identity audited by name.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{random_tree_seeded, RandomTreeConfig};
use crate::primal_dual::solve_primal;
use crate::report::ResidualTable;
use crate::sensitivity::{fd_oracle, sensitivity, DEFAULT_LADDER};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub count: usize,
    pub gammas: Vec<f64>,
    /// `(weight, γ)` terms of each blended utility.
    pub blends: Vec<Vec<(f64, f64)>>,
    pub tree: RandomTreeConfig,
    pub capital: f64,
    /// Cross-check `u″ = −γu′/x` against the finite-difference oracle for
    /// the power utilities.
    pub fd_power: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            count: 200,
            gammas: vec![0.5, 1.0, 2.0, 5.0],
            blends: vec![vec![(1.0, 0.5), (1.0, 2.0)], vec![(2.0, 1.0), (1.0, 5.0)], vec![(1.0, 0.5), (1.0, 1.5), (0.5, 4.0)]],
            tree: RandomTreeConfig::default(),
            capital: 1.0,
            fd_power: false,
        }
    }
}

impl BatteryConfig {
    pub fn utilities(&self) -> Vec<UtilitySpec> {
        self.gammas
            .iter()
            .map(|g| UtilitySpec::power(*g))
            .chain(self.blends.iter().map(|b| UtilitySpec::blend(b.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub model: usize,
    pub seed: u64,
    pub utility: String,
    pub leaves: usize,
    pub dim_gain: usize,
    pub dim_complement: usize,
    pub a: f64,
    pub b: f64,
    pub u2: f64,
    pub passed: bool,
    /// Names of failing residuals, or the error message.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: BatteryConfig,
    pub instances: Vec<InstanceSummary>,
    /// Worst value of each named residual over all instances.
    pub worst: ResidualTable,
    pub errors: usize,
    pub passed: bool,
}

fn audit_one(cfg: &BatteryConfig, model: usize, util: &UtilitySpec) -> (InstanceSummary, ResidualTable) {
    let seed = cfg.seed.wrapping_add(model as u64);
    let tree = random_tree_seeded(seed, &cfg.tree);
    let mut summary = InstanceSummary {
        model,
        seed,
        utility: util.name.clone(),
        leaves: tree.leaves().len(),
        dim_gain: 0,
        dim_complement: 0,
        a: f64::NAN,
        b: f64::NAN,
        u2: f64::NAN,
        passed: false,
        failures: vec![],
    };
    let mut run = || -> Result<ResidualTable> {
        let sol = solve_primal(&tree, util, cfg.capital)?;
        let rep = sensitivity(&tree, util, &sol)?;
        summary.dim_gain = rep.dim_gain;
        summary.dim_complement = rep.dim_complement;
        summary.a = rep.a;
        summary.b = rep.b;
        summary.u2 = rep.u2;
        let mut table = rep.residuals.clone();
        table.at_most("solver.foc", sol.foc_residual, 1e-8);
        if let (true, Some(gamma)) = (cfg.fd_power, util.constant_rra()) {
            let closed = -gamma * sol.u1 / sol.x;
            table.at_most("constant_rra.u2_closed", (rep.u2 - closed).abs() / closed.abs(), 1e-12);
            let fd = fd_oracle(&tree, util, &sol, rep.u2, &DEFAULT_LADDER, false)?;
            table.at_most("constant_rra.u2_fd", (fd.u2_fd - closed).abs() / closed.abs(), 1e-5);
        }
        Ok(table)
    };
    match run() {
        Ok(table) => {
            summary.failures = table.failures().into_iter().map(|(k, _)| k.to_string()).collect();
            summary.passed = summary.failures.is_empty();
            (summary, table)
        }
        Err(e) => {
            summary.failures = vec![e.to_string()];
            (summary, ResidualTable::new())
        }
    }
}

/// Runs every (model, utility) pair. Pairs are evaluated concurrently and
/// collected in model-then-utility order, so the report depends only on
/// the configuration.
pub fn identity_battery(cfg: &BatteryConfig) -> BatteryReport {
    let utils = cfg.utilities();
    let pairs: Vec<(usize, usize)> = (0..cfg.count).flat_map(|m| (0..utils.len()).map(move |u| (m, u))).collect();
    let results: Vec<(InstanceSummary, ResidualTable)> =
        pairs.par_iter().map(|&(m, u)| audit_one(cfg, m, &utils[u])).collect();
    let mut worst = ResidualTable::new();
    let mut instances = Vec::with_capacity(results.len());
    for (summary, table) in results {
        worst.absorb_worst(&table);
        instances.push(summary);
    }
    let errors = instances.iter().filter(|s| !s.passed && s.a.is_nan()).count();
    let passed = instances.iter().all(|s| s.passed);
    BatteryReport { config: cfg.clone(), instances, worst, errors, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        let cfg = BatteryConfig { count: 6, fd_power: true, ..BatteryConfig::default() };
        let rep = identity_battery(&cfg);
        assert!(rep.passed, "{:?}\n{}", rep.instances.iter().filter(|s| !s.passed).collect::<Vec<_>>(), rep.worst);
        assert_eq!(rep.instances.len(), 6 * 7);
    }
}
