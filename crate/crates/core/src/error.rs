use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `grid.n` = {0}: need an even number of samples, at least 4")]
    InvalidGrid(usize),

    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("the zero wavevector is not a noise mode")]
    ZeroMode,

    #[error("invalid `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("path blew up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("{aborted} of {total} replicas aborted, above the allowed fraction {allowed}")]
    TooManyAborted {
        aborted: usize,
        total: usize,
        allowed: f64,
        failures: Vec<AbortedReplica>,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One failed replica of an ensemble run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AbortedReplica {
    pub radius: u32,
    pub replica: u64,
    pub step: usize,
    pub time: f64,
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }
}
