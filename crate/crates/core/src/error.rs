use thiserror::Error;

/// Errors raised by grid construction, factorization and operator evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ParameterError: {0}")]
    Parameter(String),

    #[error("ShapeMismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("NonRealSpectrum: eigenvalue imaginary part {imag:e} exceeds tolerance {tol:e}")]
    NonRealSpectrum { imag: f64, tol: f64 },

    #[error("PositiveEigenvalue: repaired eigenvalue {0:e} is positive")]
    PositiveEigenvalue(f64),

    #[error("SingularEigenvectors: eigenvector matrix could not be inverted ({0})")]
    SingularEigenvectors(String),

    #[error("SingularMatrix: smallest singular value is zero")]
    SingularMatrix,

    #[error("PositiveEntry: entry {value:e} at flat index {index} is positive")]
    PositiveEntry { index: usize, value: f64 },

    #[error("PoleError: {0}")]
    Pole(String),

    #[error("NoConvergence: {0}")]
    NoConvergence(String),

    #[error("MemoryGuard: square buffer needs {needed} bytes, budget is {budget} bytes")]
    MemoryGuard { needed: u128, budget: u128 },

    #[error("NonFiniteState: non-finite entry at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("DegenerateExponent: sp - n(2-p) = {0:e} is zero")]
    DegenerateExponent(f64),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for violations of a numerical contract, false for bad user input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Parameter(_) | Error::ShapeMismatch { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
