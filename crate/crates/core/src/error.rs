// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("network dimension {0} exceeds the cap of {cap}", cap = crate::netspace::MAX_NETWORK_DIM)]
    DimensionTooLarge(usize),

    #[error("invalid sensor index {0}")]
    InvalidSensor(usize),

    #[error("invalid parameter index {0}")]
    InvalidParameter(usize),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("expected {expected} parameter values, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("sensor capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate extremal eigenvalue: {0}; supply an explicit eigenvector")]
    DegenerateEigenvector(String),

    #[error("generators {0} and {1} do not commute; use the general QFIM")]
    NonCommuting(usize, usize),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("estimation fails: {0}")]
    EstimationFailure(String),

    #[error("invalid weighting: {0}")]
    InvalidWeighting(String),

    #[error("POVM is not complete (deviation {0:e})")]
    IncompletePovm(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subspace too large: {0} basis states")]
    SubspaceTooLarge(usize),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) => 2,
            Error::EstimationFailure(_) => 3,
            Error::Capacity(_) | Error::DimensionTooLarge(_) | Error::SubspaceTooLarge(_) => 4,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
