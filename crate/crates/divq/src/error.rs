use thiserror::Error;

/// Errors produced by the divq library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("empty sample: at least one observation is required")]
    EmptySample,

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("risk level {alpha} outside the valid band {band} for {measure}")]
    InvalidAlpha {
        alpha: f64,
        band: &'static str,
        measure: &'static str,
    },

    #[error("risk level tagged `{found}` where `{expected}` is required")]
    MeasureMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("weights must be nonnegative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },

    #[error("{op} requires uniform sample weights")]
    NonUniformWeights { op: &'static str },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program is infeasible{}", detail_suffix(.0))]
    Infeasible(String),

    #[error("linear program is unbounded{}", detail_suffix(.0))]
    Unbounded(String),

    #[error("solver exceeded {0} iterations")]
    MaxIterations(usize),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(": {detail}")
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
