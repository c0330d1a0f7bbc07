use thiserror::Error;

/// Errors produced by the sectional-operator toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("bilinear form is not symmetric (residual {residual:e})")]
    FormNotSymmetric { residual: f64 },

    #[error("bilinear form is singular (|det| = {det:e})")]
    SingularForm { det: f64 },

    #[error("operator role mismatch: expected {expected}, residual {residual:e}")]
    RoleMismatch { expected: &'static str, residual: f64 },

    #[error("eigenvalue clustering is ill-conditioned: Krylov residual {residual:e} lies in the ambiguity band [{low:e}, {high:e})")]
    IllConditioned { residual: f64, low: f64, high: f64 },

    #[error("invalid Jordan specification: {0}")]
    InvalidJordanSpec(String),

    #[error("matrices do not commute (relative residual {residual:e})")]
    NotCommuting { residual: f64 },

    #[error("B is not a polynomial in A (relative residual {residual:e})")]
    NotPolynomial { residual: f64 },

    #[error("not sectional-compatible: {0}")]
    NotSectionalCompatible(String),

    #[error("no common sectional operator (least-squares residual {residual:e})")]
    NoCommonSectional { residual: f64 },

    #[error("singular metric at point {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
