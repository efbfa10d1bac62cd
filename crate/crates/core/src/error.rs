use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value produced by step `{step}` at iteration {iteration}")]
    NonFinite { step: &'static str, iteration: usize },

    #[error("numeric failure in {op}: {reason}")]
    Numeric { op: &'static str, reason: String },

    #[error("band {band} has zero mean; ERGAS is undefined")]
    ZeroBandMean { band: usize },

    #[error("malformed NPY file: {field}: {reason}")]
    NpyFormat { field: &'static str, reason: String },

    #[error("unsupported NPY dtype `{0}` (expected '<f4' or '<f8')")]
    NpyDtype(String),

    #[error("expected a 3-D array, found shape {0:?}")]
    NpyRank(Vec<usize>),

    #[error("NPY payload holds {actual} bytes but the header declares {expected}")]
    NpyPayload { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
