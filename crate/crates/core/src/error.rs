use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("column `{0}` not present in header")]
    MissingColumn(String),

    #[error("unparseable cell at row {row} (column `{column}`): {value:?}")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{0}` has no data rows")]
    EmptyColumn(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("training size {m} out of range for {n} observations")]
    SplitOutOfRange { m: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate training: zero scale estimate, refusing to monitor")]
    DegenerateTraining,

    #[error("non-finite observation at monitoring step {0}")]
    NonFinite(usize),

    #[error("insufficient history: need {needed}, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("rank-deficient design or zero-variance series")]
    RankDeficient,

    #[error("no candidate model converged")]
    NoConvergence,

    #[error("moving-average polynomial is not invertible")]
    NotInvertible,

    #[error("no critical value for gamma={gamma}, alpha={alpha} in table")]
    MissingTableEntry { gamma: f64, alpha: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
