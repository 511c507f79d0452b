use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid weight scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A datapoint fell in a cell that holds no training data, so the
    /// regressogram is undefined there and the model must be filtered.
    #[error("cell {cell} is empty: the estimator is undefined on it")]
    UndefinedCell { cell: usize },

    #[error("fold {fold} leaves cell {cell} without training data")]
    UntrainableFold { fold: usize, cell: usize },

    #[error("no closed-form resampling penalty for {0}")]
    NoClosedForm(String),

    #[error("no model passes the filtering step")]
    NoAdmissibleModel,

    #[error("{dropped} of {total} replications had no admissible model")]
    TooManyDroppedReplications { dropped: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
