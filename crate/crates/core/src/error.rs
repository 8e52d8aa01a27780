use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL condition violated: dt = {dt} exceeds the stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("caustic detected at t = {time}: max |div omega| = {value} exceeds {threshold}")]
    Caustic { time: f64, value: f64, threshold: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("linear solve did not converge: {0}")]
    NoConvergence(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("dump format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Grid(_) | Error::InvalidParameter(_) => 2,
            Error::Caustic { .. } | Error::NonFinite(_) | Error::NoConvergence(_) | Error::Cfl { .. } => 3,
            _ => 1,
        }
    }
}
