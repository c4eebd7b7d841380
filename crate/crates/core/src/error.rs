//! Error type shared across the crate.

use crate::variogram::VariogramModel;

/// Errors produced by geometry, fitting, registration, embedding and kriging.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A location fell outside the partitioned domain box.
    #[error("location outside domain: {0}")]
    OutsideDomain(String),

    /// A partition failed validation (overlap, gap, degenerate box, ...).
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Weights are undefined for a zero-length segment.
    #[error("coincident locations: weights are undefined for a zero-length segment")]
    CoincidentSites,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A variogram with no usable continuous part (zero or negative partial sill).
    #[error("degenerate variogram: {0}")]
    DegenerateVariogram(String),

    #[error("grid too coarse: need at least {need} samples, got {got}")]
    GridTooCoarse { need: usize, got: usize },

    /// Cholesky failed even after jitter escalation.
    #[error("covariance matrix not positive definite after jitter escalation")]
    NotPositiveDefinite,

    /// The simplex search hit its iteration cap; the best iterate is attached.
    #[error("optimizer did not converge within {iters} iterations (best log-likelihood {loglik})")]
    NonConvergence {
        iters: usize,
        loglik: f64,
        best: Box<VariogramModel>,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Denominator of a normalized statistic vanished (e.g. constant distance matrix).
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
