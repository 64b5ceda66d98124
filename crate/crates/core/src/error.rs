use thiserror::Error;

use crate::expr::{EvalError, SyntaxError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which coefficient matrix of a system an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MatrixName {
    A,
    B,
    C,
}

impl std::fmt::Display for MatrixName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("{matrix}[{row}][{col}] ({part}): {source}")]
    EntryParse {
        matrix: MatrixName,
        row: usize,
        col: usize,
        part: &'static str,
        source: SyntaxError,
    },

    #[error("{matrix}[{row}][{col}] at t = {t}: {source}")]
    EntryEval {
        matrix: MatrixName,
        row: usize,
        col: usize,
        t: f64,
        source: EvalError,
    },

    #[error("{matrix} is not Hermitian at t = {t}: entry ({row}, {col}) differs from the conjugate of ({col}, {row}) by {defect:e}")]
    HermitianViolation {
        matrix: MatrixName,
        row: usize,
        col: usize,
        t: f64,
        defect: f64,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPositiveSemidefinite { eigenvalue: f64, tolerance: f64 },

    #[error("t = {t} with step {step:e} leaves the path domain [{start}, {end}]")]
    OutOfDomain {
        t: f64,
        step: f64,
        start: f64,
        end: f64,
    },

    #[error("eigenvector continuity defect {defect:.3} near t = {t} exceeds 0.5; refine the grid")]
    GridTooCoarse { defect: f64, t: f64 },

    #[error("the range condition for F fails at t = {t} (residual {residual:e})")]
    UnsolvableEq12 { t: f64, residual: f64 },

    #[error("eigenvalue b_{m}(t) = {value:e} is negative at t = {t}")]
    NegativeEigenvalue { m: usize, t: f64, value: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("step limit {limit} reached at t = {t}")]
    TooManySteps { t: f64, limit: usize },

    #[error("index j = {j} out of range 1..={n}")]
    InvalidIndex { j: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at t = {t} in {what}")]
    NonFinite { t: f64, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed system file: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax(_) => "SyntaxError",
            Error::Eval(_) => "EvalError",
            Error::EntryParse { .. } => "ParseError",
            Error::EntryEval { .. } => "EvalError",
            Error::HermitianViolation { .. } => "HermitianViolation",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPositiveSemidefinite { .. } => "NotPositiveSemidefinite",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::UnsolvableEq12 { .. } => "UnsolvableEq12",
            Error::NegativeEigenvalue { .. } => "NegativeEigenvalue",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::HypothesisViolated(_) => "HypothesisViolated",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::TooManySteps { .. } => "TooManySteps",
            Error::InvalidIndex { .. } => "InvalidIndex",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonFinite { .. } => "NonFinite",
            Error::Io(_) => "IoError",
            Error::Json(_) => "ParseError",
            Error::Csv(_) => "IoError",
        }
    }

    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Syntax(_)
                | Error::EntryParse { .. }
                | Error::HermitianViolation { .. }
                | Error::DimensionMismatch { .. }
                | Error::NotHermitian { .. }
                | Error::NotPositiveSemidefinite { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::PreconditionFailed(_)
                | Error::HypothesisViolated(_)
                | Error::InvalidIndex { .. }
                | Error::InvalidInput(_)
                | Error::Json(_)
        )
    }
}
