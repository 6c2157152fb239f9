use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {last_residual:e})")]
    FixedPoint {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Monte Carlo path {path} failed: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("assumption check failed: {0}")]
    Assumption(Box<crate::coefficients::AssumptionViolation>),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
