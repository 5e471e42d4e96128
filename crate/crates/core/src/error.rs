//! Error type shared by every module.

use thiserror::Error;

use crate::geometry::Vector;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("region has zero Lebesgue measure and cannot be sampled uniformly")]
    ZeroMeasure,

    #[error("rejection sampler efficiency too low: {accepted} accepted out of {attempts} attempts")]
    LowAcceptance { attempts: u64, accepted: u64 },

    #[error("no robustness region assigned to point {0:?}")]
    MissingRegion(Vector),

    #[error("point has norm {norm}, expected a point on the sphere of radius {radius}")]
    NotOnSphere { norm: f64, radius: f64 },

    #[error("beta search underflow: greedy cover reached {achieved} centers, {requested} requested")]
    BetaUnderflow { achieved: usize, requested: usize },

    #[error("construction audit failed: {0}")]
    AuditFailure(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("hypothesis class is empty")]
    EmptyClass,

    #[error("search budget exceeded after {scanned} subsets (budget {budget})")]
    BudgetExceeded { scanned: u64, budget: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
