use thiserror::Error;

/// Errors produced by structure construction and numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid subdivision rule: {0}")]
    InvalidRule(String),

    #[error("construction failed at cell {address}: {reason}")]
    Construction { address: String, reason: String },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("interior component containing vertex {vertex} has no path to the boundary")]
    DisconnectedInterior { vertex: usize },

    #[error("level {level} out of range (structure depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("level mismatch: expected {expected}, got {got}")]
    LevelMismatch { expected: usize, got: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("vertex {vertex} does not belong to cell {cell}")]
    VertexNotInCell { vertex: usize, cell: String },

    #[error("renormalization fixed point violated: trace deviation {residual:e}")]
    FixedPointViolation { residual: f64 },

    #[error("operation requires equal resistance scalings r_j")]
    UnequalScalings,

    #[error("no spectral dimension in (0, 2): {0}")]
    NoSpectralDimension(String),

    #[error(
        "word enumeration needs {words} words, above the cap {cap}; use the Monte Carlo estimator"
    )]
    EnumerationCap { words: u64, cap: u64 },

    #[error("no sign change for the pressure root in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("element is not orthogonal to the coarse subspace (residual {residual:e})")]
    NotOrthogonal { residual: f64 },

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("internal dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("eigensolve requires strictly positive masses")]
    NonPositiveMass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
