// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the detection pipeline.
///
/// Time indices carried by variants are 1-based unless the field name says
/// otherwise.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("segment {segment} is not stable: spectral radius {radius} (margin {margin})")]
    Unstable {
        segment: usize,
        radius: f64,
        margin: f64,
    },

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("interval ({start}, {end}] is too short for lag {lag}")]
    IntervalTooShort { start: usize, end: usize, lag: usize },

    #[error("series of length {n} is too large for exhaustive search (max {max})")]
    TooLarge { n: usize, max: usize },

    #[error("fit on interval ({start}, {end}] failed: {reason}")]
    SolverFailure {
        start: usize,
        end: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::Unstable { .. } => "unstable",
            Error::EigenNonConvergence { .. } => "eigen_non_convergence",
            Error::IntervalTooShort { .. } => "interval_too_short",
            Error::TooLarge { .. } => "too_large",
            Error::SolverFailure { .. } => "solver_failure",
        }
    }
}
