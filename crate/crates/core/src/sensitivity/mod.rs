//! Second-order sensitivities at an interior optimum: the risk measure
//! `R(x)`, the gain subspace and its complement, the two projection
//! problems and everything assembled from them.

pub mod engine;
pub mod fd;
pub mod subspace;

pub use engine::{
    gain_subspace, martingale_audit, numeraire_rank_report, risk_measure, sensitivity, NodeRank, RiskMeasure,
    SensitivityReport, BASIS_TOL,
};
pub use fd::{fd_oracle, log_log_slope, oracle_agreement, richardson, ExpansionPoint, FdOracle, DEFAULT_LADDER};
pub use subspace::{centered_span, inner, orthocomplement, quad_project, Projection, SubspaceBasis};
