//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by data ingestion, estimation, and testing.
#[derive(Debug, Error)]
pub enum AfError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Csv { path: String, msg: String },

    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: years not contiguous: expected {expected}, found {found}")]
    YearGap {
        path: String,
        expected: i32,
        found: i32,
    },

    #[error("series invalid: {0}")]
    InvalidSeries(String),

    #[error("window [{start}, {end}] outside data range [{first}, {last}]")]
    WindowOutOfRange {
        start: i32,
        end: i32,
        first: i32,
        last: i32,
    },

    #[error("missing months in ENSO window for year {year}: {missing:?}")]
    MissingMonths { year: i32, missing: Vec<(i32, u32)> },

    #[error("covariates required but not present in dataset: {0}")]
    MissingCovariates(String),

    #[error("zero emissions in year {year}: ratio G_t/E_t undefined (division hazard of the ratio estimator)")]
    ZeroEmissions { year: i32 },

    #[error("design matrix is rank deficient or ill-conditioned ({0})")]
    RankDeficient(String),

    #[error("sample too short: {needed} observations needed, {got} available")]
    SampleTooShort { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no critical-value table for {family} / {variant}")]
    MissingTable { family: String, variant: String },

    #[error("degenerate likelihood: {0}")]
    DegenerateLikelihood(String),
}

pub type Result<T> = std::result::Result<T, AfError>;
