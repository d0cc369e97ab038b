use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid entity `{id}`: {reason}")]
    InvalidEntity { id: String, reason: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("prediction set `{0}` is empty")]
    EmptySet(String),

    #[error("percentage {0} outside [0, 100]")]
    PercentOutOfRange(f64),

    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),

    #[error("{metric} undefined: zero defectives")]
    NoDefectives { metric: &'static str },

    #[error("AUC undefined for single-class data")]
    SingleClass,

    #[error("gain undefined: base value is zero")]
    GainUndefined,

    #[error("no informative pairs: all differences are zero")]
    NoInformativePairs,

    #[error("{0} undefined under zero variance")]
    ZeroVariance(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dangling {kind} reference(s): {}", ids.join(", "))]
    DanglingReference { kind: &'static str, ids: Vec<String> },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
