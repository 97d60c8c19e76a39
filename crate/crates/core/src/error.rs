use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("target analyte `{0}` not found among input columns")]
    MissingTarget(String),

    #[error("row {row}: cannot parse date `{value}` (expected YYYY-MM-DD)")]
    BadDate { row: usize, value: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{column}`: {reason}")]
    BadColumn { column: String, reason: String },

    #[error("no rows remain after applying the missing-value policy")]
    AllRowsDropped,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("analyte schema mismatch: missing [{}], unexpected [{}]", .missing.join(", "), .extra.join(", "))]
    Schema {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("objective became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
