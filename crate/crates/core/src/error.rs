use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution at {context}: {reason}")]
    InvalidDistribution { context: String, reason: String },

    #[error("reward {value} at {context} is outside the admissible range")]
    RewardOutOfRange { context: String, value: f64 },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("distribution has a non-positive entry; the mirror step needs an interior point")]
    DegenerateDistribution,

    #[error("opponent history is empty")]
    EmptyHistory,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
