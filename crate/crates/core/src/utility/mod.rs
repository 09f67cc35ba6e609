//! Utility functions, conjugates and risk-aversion diagnostics.

pub mod conjugate;
pub mod diagnostics;
pub mod profile;
pub mod spec;

pub use conjugate::{conjugate, marginal_inverse, ConjugatePoint};
pub use diagnostics::{
    corridor_scan, elasticity_probe, expansion_fd_errors, expansion_probe, log_grid, marginal_ratio_check, rra,
    CorridorScan, ElasticityProbe, ExpansionSample, MarginalRatioReport,
};
pub use profile::{Baseline, Bump, ConstraintSet, CurvatureTarget, Level, Mode, MomentCondition, Profile};
pub use spec::{load_utility, parse_utility, Family, UtilityDocument, UtilitySpec, UtilityValues};

use crate::error::Result;

/// Builds the utility described by `constraints`. The result carries the
/// requested corridor even when the construction leaves it (spiked
/// utilities do so on purpose); use [`corridor_scan`] to see where.
pub fn build_constrained_utility(constraints: &ConstraintSet) -> Result<UtilitySpec> {
    let profile = constraints.build()?;
    Ok(UtilitySpec::from_profile("constrained", profile, constraints.corridor))
}

/// Largest relative anchor miss of a built profile.
pub fn anchor_residual(constraints: &ConstraintSet, profile: &Profile) -> f64 {
    constraints
        .anchors
        .iter()
        .map(|(z, g)| (profile.marginal(*z) / g - 1.0).abs())
        .fold(0.0, f64::max)
}
