use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate row for security {security_id} on {date}")]
    DuplicateRow {
        line: u64,
        security_id: String,
        date: NaiveDate,
    },

    #[error("line {line}: rows for security {security_id} are out of date order ({date} follows {previous})")]
    UnorderedRows {
        line: u64,
        security_id: String,
        date: NaiveDate,
        previous: NaiveDate,
    },

    #[error("invalid security record {security_id}: {message}")]
    InvalidRecord { security_id: String, message: String },

    #[error("security {security_id} is not listed on {date}")]
    NotListed { security_id: String, date: NaiveDate },

    #[error("market cap of {security_id} is undefined on {date}: no shares outstanding observed yet")]
    CapUndefined { security_id: String, date: NaiveDate },

    #[error("date {0} is not a trading date of the dataset")]
    UnknownDate(NaiveDate),

    #[error("unknown security {0}")]
    UnknownSecurity(String),

    #[error("empty universe: {0}")]
    EmptyUniverse(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("equity curves are defined on different date grids")]
    GridMismatch,

    #[error("equity curve has a non-positive value on {0}")]
    NonPositiveValue(NaiveDate),

    #[error("periods overlap or are out of order: {0}")]
    PeriodOrder(String),

    #[error("invalid equity curve: {0}")]
    InvalidCurve(String),

    #[error("sharpe ratio undefined: return standard deviation is zero")]
    UndefinedSharpe,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("pooled variance is zero")]
    ZeroVariance,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown metric `{0}` (expected `sharpe` or `cagr`)")]
    UnknownMetric(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
