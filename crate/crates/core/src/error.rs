use thiserror::Error;

use crate::weyl::MonomialIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hbar mismatch: {0} vs {1}")]
    HbarMismatch(f64, f64),

    #[error("invalid hbar {0}: must be finite and nonnegative")]
    InvalidHbar(f64),

    #[error("degree {0} exceeds the supported cap {cap}", cap = crate::MAX_DEGREE)]
    DegreeTooHigh(u32),

    #[error("invalid half-integer {0:?}")]
    InvalidHalfInt(String),

    #[error("max order {0} must be even")]
    OddOrder(u32),

    #[error("moment table has order {have}, but {need} is required")]
    InsufficientOrder { have: u32, need: u32 },

    #[error("moment {0} missing from table")]
    MissingMoment(MonomialIndex),

    #[error("invalid moment table: {0}")]
    InvalidTable(String),

    #[error("matrix is not symplectic: det = {0}")]
    NotSymplectic(f64),

    #[error("covariance matrix is not symmetric positive definite")]
    InvalidCovariance,

    #[error("not hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("truncation-unsafe dimension {dim}: at least {need} required")]
    TruncationUnsafe { dim: usize, need: usize },

    #[error("invalid Wigner grid: {0}")]
    InvalidGrid(String),

    #[error("grid normalization failure: integral {0}")]
    Normalization(f64),

    #[error("moments limited by grid support: {0:?}")]
    SupportLimited(Vec<MonomialIndex>),

    #[error("polynomial has non-real coefficients")]
    NotHermitianPolynomial,

    #[error("hankel input must have odd length, got {0}")]
    EvenHankelLength(usize),

    #[error("integer overflow in exact oracle arithmetic")]
    Overflow,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
