use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised at operation boundaries.
///
/// Numerical failure modes (singular pivots, non-finite values, blow-up) are
/// reported as typed errors rather than letting NaN/Inf propagate silently
/// into gradients.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: division by zero")]
    DivisionByZero { op: &'static str },
    #[error("singular matrix: pivot {pivot:e} at elimination column {index}")]
    SingularMatrix { index: usize, pivot: f64 },
    #[error("solution blow-up at step {step}: max-norm exceeded {limit}")]
    BlowUp { step: usize, limit: f64 },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, Error>;
