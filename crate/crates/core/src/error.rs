use thiserror::Error;

use crate::solver::BoundarySolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    #[error("operation requires canonical parameters (theta = 0, horizon = 1)")]
    NotCanonical,

    #[error(
        "Picard iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, for inspection or partial output.
        partial: Box<BoundarySolution>,
    },

    #[error("scalar boundary solve failed at node {node}: {reason}")]
    ScalarSolve { node: usize, reason: String },

    #[error("adaptive quadrature failed: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed boundary file, line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}
