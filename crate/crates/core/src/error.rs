use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt field definition: non-finite velocity at t={t}, x={x:?}")]
    CorruptField { t: f64, x: Vec<f64> },

    #[error("step-size underflow: eps={eps} needs {substeps} substeps per time sample")]
    Resolution { eps: f64, substeps: usize },

    #[error("eps schedule exhausted without convergence (tol={tol}); Cauchy distances: {trace:?}")]
    Convergence { tol: f64, trace: Vec<f64> },

    #[error("transport flow has negative jacobian {min_jacobian} below -{tol}")]
    NegativeJacobian { min_jacobian: f64, tol: f64 },

    #[error("support violation: {0}")]
    Support(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field is not admissible: {0}")]
    Inadmissible(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }
}
