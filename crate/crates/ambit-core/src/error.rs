use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{column}` in {file}")]
    MissingColumn { file: String, column: String },

    #[error("failed to parse {file} row {row}: {message}")]
    BadRecord {
        file: String,
        row: usize,
        message: String,
    },

    #[error("zone table is invalid: {0}")]
    InvalidZones(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no OD pair survives filtering (min_total={min_total}, top_k={top_k})")]
    EmptyTask { min_total: u64, top_k: usize },

    #[error("split window `{window}` contains no rows")]
    EmptySplit { window: String },

    #[error("holdout evaluation set is empty")]
    EmptyHoldout,

    #[error("design matrix is rank deficient: column `{column}` is collinear")]
    RankDeficient { column: String },

    #[error("GLM fit diverged at iteration {iteration}: {message}")]
    FitDiverged { iteration: usize, message: String },

    #[error("design has no identifiable columns; empty levels: {0:?}")]
    Unidentifiable(Vec<String>),

    #[error("boosting aborted at round {round}: {message}")]
    BoostFailed { round: usize, message: String },

    #[error("feature `{0}` missing from prediction input")]
    MissingFeature(String),

    #[error("feature names do not match training ({0})")]
    FeatureMismatch(String),

    #[error("all grid candidates failed: {0:?}")]
    GridExhausted(Vec<String>),

    #[error("{0}")]
    Empty(String),

    #[error("baseline prediction is not finite at row {row} (value {value})")]
    BadBaseline { row: usize, value: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
