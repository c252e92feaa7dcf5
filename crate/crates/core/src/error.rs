use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("truncation leakage {leakage:.3e} exceeds budget {budget:.1e} at dim {dim}; use a larger dimension")]
    TruncationBudget { dim: usize, leakage: f64, budget: f64 },

    #[error("solver residual {residual:.3e} exceeds tolerance (rank {rank} of {dim})")]
    Residual { residual: f64, rank: usize, dim: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },

    #[error("at {axis} = {value}: {source}")]
    AtPoint { axis: String, value: f64, source: Box<Error> },
}

impl Error {
    /// Bad input as opposed to a numerical failure on valid input.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::DimensionMismatch(_)
            | Error::InvalidArgument(_)
            | Error::Unphysical(_)
            | Error::Validation(_)
            | Error::Io(_)
            | Error::Json { .. } => true,
            Error::AtPoint { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json { line: e.line(), column: e.column(), msg: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
