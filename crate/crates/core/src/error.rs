use thiserror::Error;

use crate::market::{ArbitrageCertificate, ValidationReport};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid market tree: {0}")]
    InvalidTree(ValidationReport),

    #[error("model admits arbitrage at node {} (gain {:?})", .0.node, .0.gains)]
    Arbitrage(Box<ArbitrageCertificate>),

    #[error("invalid process: {0}")]
    InvalidProcess(String),

    #[error("utility evaluated at {x} outside its trusted domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("value {0} is not reachable on the trusted range")]
    Unreachable(f64),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("solution is not interior: {0}")]
    NotInterior(String),

    #[error("corridor violated: {0}")]
    Corridor(String),

    #[error("model file: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by the input model or utility rather than the
    /// numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidTree(_)
                | Error::Arbitrage(_)
                | Error::InvalidProcess(_)
                | Error::Domain { .. }
                | Error::Precondition(_)
                | Error::Infeasible(_)
                | Error::Unreachable(_)
                | Error::Corridor(_)
                | Error::Parse(_)
        )
    }
}
