use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("index {index} out of range (must be below {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (anti-Hermitian part {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("charges are not linearly independent together with the identity (smallest Gram eigenvalue {sigma_min:.3e})")]
    DependentCharges { sigma_min: f64 },

    #[error("target values are not achievable (|mu| = {mu_norm:.3e}, max residual {residual:.3e})")]
    InfeasibleTarget { mu_norm: f64, residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("approximate microcanonical subspace is empty")]
    EmptySubspace,

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    #[error("alpha = {alpha} is outside the validity range of the {variant} divergence")]
    AlphaOutOfRange { alpha: f64, variant: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
