use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: non-positive price {value}")]
    NonPositivePrice { row: usize, value: f64 },

    #[error("row {row}: non-monotone dates ({previous} followed by {date})")]
    NonMonotoneDates {
        row: usize,
        previous: String,
        date: String,
    },

    #[error("row {row}: unparsable row: {reason}")]
    Unparsable { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("series too short: {len} samples, at least {min} required")]
    TooShort { len: usize, min: usize },

    #[error("underdetermined kernel: window {window} must exceed degree + 1 = {}", degree + 1)]
    Underdetermined { window: usize, degree: usize },

    #[error("ill-conditioned exactness system (condition number {0:.3e} > 1e12)")]
    IllConditioned(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index {index} outside the defined range {start}..={end}")]
    OutOfRange {
        index: usize,
        start: usize,
        end: usize,
    },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
