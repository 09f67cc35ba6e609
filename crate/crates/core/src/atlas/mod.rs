//! Truncated versions of the counterexamples, with the diagnostics that
//! exhibit each failure.

pub mod example1;
pub mod example2;
pub mod example3;
pub mod example4;
pub mod ladder;

use rayon::prelude::*;

pub use example1::{example1, Example1, Example1Report};
pub use example2::{example2, Example2, Example2Report};
pub use example3::{bias_safe_window, default_window, example3, Example3, Example3Options, Example3Report, Quotient};
pub use example4::{example4, Example4, Example4Report};
pub use ladder::{divergence_report, DivergenceReport, TruncationLadder};

use crate::error::Result;
use crate::market::{MarketTree, NodeSpec};

/// Probability floor for truncated models; geometric tails reach `8^{−20}`.
pub const ATLAS_FLOOR: f64 = 1e-60;

pub const DEFAULT_LEVELS: [usize; 4] = [10, 20, 40, 80];

fn one_period_tree(
    assets: Vec<String>,
    s0: Vec<f64>,
    outcomes: Vec<(f64, Vec<f64>)>,
    floor: f64,
) -> Result<MarketTree<f64>> {
    let mut specs = vec![NodeSpec { id: 0, parent: None, time: 0, prob: 1.0, prices: s0 }];
    for (k, (p, s)) in outcomes.into_iter().enumerate() {
        specs.push(NodeSpec { id: k as u64 + 1, parent: Some(0), time: 1, prob: p, prices: s });
    }
    MarketTree::with_floor(assets, specs, floor)
}

/// Runs `f` on every level concurrently, keeping level order.
pub fn run_levels<T: Send>(levels: &[usize], f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    levels.par_iter().map(|&n| f(n)).collect()
}

/// `div1(N)` across `levels`.
pub fn example1_ladder(levels: &[usize]) -> Result<(Vec<Example1Report>, TruncationLadder)> {
    let reports: Vec<Example1Report> = run_levels(levels, |n| Ok(example1(n)?.report))?;
    let values = reports.iter().map(|r| r.div1).collect();
    Ok((reports, TruncationLadder::new("div1", levels.to_vec(), values)))
}

/// `div2(N, a)` across `levels` at the given `a`.
pub fn example2_ladder(levels: &[usize], a: f64) -> Result<(Vec<Example2Report>, TruncationLadder)> {
    let reports: Vec<Example2Report> = run_levels(levels, |n| Ok(example2(n, &[a])?.report))?;
    let values = reports.iter().map(|r| r.div2[0].1).collect();
    Ok((reports, TruncationLadder::new(format!("div2(a={a})"), levels.to_vec(), values)))
}
