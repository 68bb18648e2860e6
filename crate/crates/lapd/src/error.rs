//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong when building models, stepping chains, or
/// evaluating oracles.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A scalar or structural argument violates its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A step-size schedule cannot produce finite diffusion times.
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The dense covariance path is capped to keep eigendecompositions cheap.
    #[error("dense covariance path supports d <= {cap}, got d = {dim}")]
    DimensionCap { dim: usize, cap: usize },

    /// A covariance matrix is not symmetric positive definite.
    #[error("covariance is not positive definite")]
    SingularCovariance,

    /// Per-datum gradients were requested from a likelihood without a dataset.
    #[error("likelihood carries no dataset; per-datum gradients unavailable")]
    MissingDataset,

    /// A requested combination is outside what the crate ships.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Mode search hit its iteration cap before meeting the residual target.
    /// This usually means the supplied oracles are inconsistent.
    #[error("mode search did not converge within {max_iter} iterations (residual {residual:.3e})")]
    NonConvergence { max_iter: usize, residual: f64 },

    /// A chain produced NaN or infinity.
    #[error("non-finite chain state at iteration {t}")]
    NonFiniteState { t: usize },

    /// An operation that needs samples received none.
    #[error("empty sample set")]
    EmptySamples,

    /// A weight vector does not match the trajectory it is paired with.
    #[error("weight vector length {weights} does not match trajectory length {steps}")]
    WeightMismatch { weights: usize, steps: usize },

    /// The quadrature grid has too few points to meet accuracy targets.
    #[error("quadrature grid too coarse: {points} points (need at least {min})")]
    GridTooCoarse { points: usize, min: usize },

    /// All posterior density values underflowed on the quadrature grid,
    /// which means the grid does not cover the posterior bulk.
    #[error("quadrature grid underflow: posterior mass vanished on the grid")]
    GridUnderflow,

    /// An activation family name did not parse.
    #[error("unknown activation family `{0}` (expected `half-squared-error` or `logistic`)")]
    UnknownActivation(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
