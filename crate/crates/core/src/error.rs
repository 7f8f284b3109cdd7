use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {0} is outside every trading session")]
    OutOfSession(f64),

    #[error("time {t} is outside the path range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("schedule and simulation disagree: {0}")]
    Inconsistent(String),

    #[error("no break-even size exists: per-unit gain {0} is not positive")]
    NoBreakEven(f64),

    #[error("no break-even size needed: round-trip cost {0} is not positive")]
    NonPositiveCost(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("insufficient data: need at least 2 bars, got {0}")]
    InsufficientData(usize),

    #[error("series is empty")]
    EmptySeries,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
