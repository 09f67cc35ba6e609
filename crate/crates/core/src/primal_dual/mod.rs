//! Primal and dual optimal investment on finite trees.

pub mod audit;
pub mod solver;

pub use audit::{first_order_audit, value_curve, ValueCurve};
pub use solver::{solve_dual, solve_dual_with, solve_primal, solve_primal_with, PrimalDualSolution, SolverOptions};
