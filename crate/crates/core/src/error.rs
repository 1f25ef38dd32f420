use alloc::string::String;

use crate::train::TrainHistory;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Both class densities vanish, so ratios of them are undefined.
    #[error("undefined at this point: both densities vanish")]
    UndefinedPoint,
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("training diverged at epoch {epoch}")]
    TrainingFailure { epoch: usize, history: TrainHistory },
    #[error("cannot impute column `{column}`: no observed values")]
    Imputation { column: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("outside the domain of the formula: {0}")]
    Domain(&'static str),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
