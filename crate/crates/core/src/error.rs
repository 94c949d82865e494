use std::path::PathBuf;

/// Errors raised by the low-rank kernels, solvers and integrators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("projected system of size {size} exceeds capacity {cap}; increase the truncation tolerance")]
    Capacity { size: usize, cap: usize },

    #[error("iterative solver failed after {iterations} iterations (relative residual {residual:.3e}, target {target:.3e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("{context}: {source}")]
    Located {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn at(self, context: impl Into<String>) -> Error {
        Error::Located {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
