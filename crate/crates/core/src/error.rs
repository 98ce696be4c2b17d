use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector is not on the unit sphere (norm {norm:.3e})")]
    NotUnit { norm: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    EigenNonConvergence { sweeps: usize, residual: f64 },

    #[error("secular root finder did not converge on interval ({lo:.6e}, {hi:.6e})")]
    RootNonConvergence { lo: f64, hi: f64 },

    #[error("brute-force oracle supports n in {{2, 3}}, got n = {0}")]
    UnsupportedDimension(usize),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("insufficient data: {found} envelope points, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("trace has not converged: {0}")]
    NotConverged(String),

    #[error("schema error at `{field}`: {msg}")]
    Schema { field: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
