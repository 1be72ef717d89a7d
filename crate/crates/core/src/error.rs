use thiserror::Error;

/// Errors raised by the simulation, harness and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("event cap exceeded: more than {cap} arrivals before horizon {horizon}")]
    EventCapExceeded { cap: usize, horizon: f64 },

    #[error("time {t} lies outside [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ensemble too small: {got} paths, need at least {need}")]
    InsufficientPaths { got: usize, need: usize },

    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("suite `{suite}` failed: {source}")]
    Suite {
        suite: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_suite(self, suite: &str) -> Self {
        Error::Suite {
            suite: suite.to_string(),
            source: Box::new(self),
        }
    }
}
