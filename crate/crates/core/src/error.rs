use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path} at row {row}: {msg}")]
    CsvParse { path: PathBuf, row: usize, msg: String },

    #[error("non-finite entry at row {row}, col {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{which} range [{start}, {end}) too short: need at least {need} steps")]
    RangeTooShort {
        which: &'static str,
        start: usize,
        end: usize,
        need: usize,
    },

    #[error("invalid config: {0}")]
    BadConfig(String),

    #[error("non-sequential push: got t={got}, expected t={expected}")]
    NonSequentialPush { got: usize, expected: usize },

    #[error("read of time index {index} beyond stream head (now={now:?})")]
    LeakageAttempt { index: usize, now: Option<usize> },

    #[error("time index {index} already evicted (oldest retained is {oldest:?})")]
    Evicted { index: usize, oldest: Option<usize> },

    #[error("node index {index} out of bounds for {count} nodes")]
    NodeOutOfBounds { index: usize, count: usize },

    #[error("time offset {t} out of bounds (limit {limit})")]
    TimeOutOfBounds { t: usize, limit: usize },

    #[error("non-finite {what} encountered at step {step}")]
    NonFinite { what: &'static str, step: u64 },

    #[error("leakage audit violation: {count} future read(s) attempted during the run")]
    LeakageViolation { count: u64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("empty logs: no test-phase steps to evaluate")]
    EmptyLogs,
}

pub type Result<T> = std::result::Result<T, Error>;
