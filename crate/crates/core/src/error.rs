use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite: residual diagonal {value:e} at index {index}")]
    NotPsd { index: usize, value: f64 },

    #[error("residual trace {residual:e} above tolerance {tol:e} at maximum rank {max_rank}")]
    RankExceeded { residual: f64, tol: f64, max_rank: usize },

    #[error("{what} is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPd { what: String, min_eig: f64 },

    #[error("{what} failed to converge after {iterations} iterations")]
    ConvergenceFailure { what: String, iterations: usize },

    #[error("homo-lumo gap not positive (delta = {0:e})")]
    GapNotPositive(f64),

    #[error("Woodbury core I + M is singular")]
    SingularCore,

    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("orbital index {index} out of range 0..{n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dense {what} of dimension {dim} exceeds guard {guard}")]
    SizeGuard { what: &'static str, dim: usize, guard: usize },

    #[error("spectrum has imaginary part {imag:e} at eigenvalue {real:e}")]
    ComplexSpectrum { real: f64, imag: f64 },

    #[error("Ritz value {real:e} has imaginary part {imag:e}")]
    ComplexRitzValue { real: f64, imag: f64 },

    #[error("reduced basis is rank deficient (smallest singular value {0:e})")]
    RankDeficientBasis(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("line {line}: {field}: {message}")]
    Parse { line: usize, field: String, message: String },

    #[error("validation failed: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPsd { .. } => "NOT_PSD",
            Error::RankExceeded { .. } => "RANK_EXCEEDED",
            Error::NotPd { .. } => "NOT_PD",
            Error::ConvergenceFailure { .. } => "CONVERGENCE",
            Error::GapNotPositive(_) => "GAP_NOT_POSITIVE",
            Error::SingularCore => "SINGULAR_CORE",
            Error::RankMismatch { .. } => "RANK_MISMATCH",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::LengthMismatch(_) => "LENGTH_MISMATCH",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::SizeGuard { .. } => "SIZE_GUARD",
            Error::ComplexSpectrum { .. } => "COMPLEX_SPECTRUM",
            Error::ComplexRitzValue { .. } => "COMPLEX_RITZ_VALUE",
            Error::RankDeficientBasis(_) => "RANK_DEFICIENT_BASIS",
            Error::InvalidParams(_) => "INVALID_PARAMS",
            Error::Parse { .. } => "PARSE",
            Error::Validation { .. } => "VALIDATION",
            Error::Io { .. } => "IO",
            Error::Json(_) => "JSON",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
