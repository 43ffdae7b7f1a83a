use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A node has no positive edge weight, so the graph cannot be normalized.
    #[error("degenerate graph: node {node} is isolated (raise k or sigma)")]
    DegenerateGraph { node: usize },

    #[error("propagation did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        iterations: usize,
        residual: f64,
        last_iterate: Box<DMatrix<f64>>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("experiment failed ({source}); config: {config}")]
    Experiment {
        config: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
            Error::DegenerateGraph { .. }
            | Error::ConvergenceFailure { .. }
            | Error::Numeric(_)
            | Error::UndefinedMetric(_) => 4,
            Error::Experiment { source, .. } => source.exit_code(),
        }
    }
}
