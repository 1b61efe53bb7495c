use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension {dim} exceeds the configured limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("no interpolator exists: {0}")]
    NoInterpolator(String),

    #[error("ill-conditioned design: smallest retained singular value {smallest:e} vs largest {largest:e}")]
    IllConditioned { smallest: f64, largest: f64 },

    #[error("solver did not converge after {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("infeasible: radius {radius} is below the minimum interpolating norm {min_norm}")]
    Infeasible { radius: f64, min_norm: f64 },

    #[error("unsupported norm {0} for this operation")]
    UnsupportedNorm(String),

    #[error("zero vector has no dual-norm subgradient")]
    ZeroVector,

    #[error("covariance is identically zero")]
    ZeroCovariance,

    #[error("covariance is singular")]
    SingularCovariance,

    #[error("covariance is not diagonal")]
    NotDiagonal,

    #[error("isotropic basis-pursuit norm bound requires identity covariance")]
    UnsupportedForIsotropic,

    #[error("delta = {delta} is outside (0, {max}]")]
    DeltaOutOfRange { delta: f64, max: f64 },

    #[error("B = {b} is below the required minimum {min}")]
    BTooSmall { b: f64, min: f64 },

    #[error("split size k = {k} out of range 0..={dim}")]
    KOutOfRange { k: usize, dim: usize },

    #[error("tail after removing the top {0} eigenvalues is zero")]
    DegenerateTail(usize),

    #[error("need at least {min} Monte Carlo samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("empty sequence")]
    EmptySequence,
}

pub type Result<T> = std::result::Result<T, LabError>;
