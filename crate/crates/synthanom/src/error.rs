use std::path::PathBuf;

use serde::Serialize;

/// Errors of the command-line layer; each maps to a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] synthanom_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type AppResult<T> = Result<T, AppError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use synthanom_core::Error as E;
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            AppError::Core(E::TrainingFailure { .. } | E::NonFinite { .. }) => EXIT_TRAINING,
            AppError::Core(E::Config(_) | E::InvalidParameter(_) | E::Domain(_)) => EXIT_USAGE,
            AppError::Core(_) => EXIT_DATA,
            AppError::Io { .. } | AppError::Parse { .. } | AppError::Csv(_) | AppError::Json(_) => EXIT_DATA,
        }
    }

    pub fn kind(&self) -> &'static str {
        use synthanom_core::Error as E;
        match self {
            AppError::Usage(_) => "usage",
            AppError::Core(E::TrainingFailure { .. }) => "training_failure",
            AppError::Core(E::NonFinite { .. }) => "non_finite",
            AppError::Core(E::Config(_)) => "config",
            AppError::Core(E::InvalidParameter(_)) => "invalid_parameter",
            AppError::Core(E::Domain(_)) => "domain",
            AppError::Core(E::Schema(_)) => "schema",
            AppError::Core(E::Imputation { .. }) => "imputation",
            AppError::Core(E::Shape { .. }) => "shape",
            AppError::Core(E::UndefinedPoint) => "undefined_point",
            AppError::Core(E::UndefinedMetric(_)) => "undefined_metric",
            AppError::Io { .. } => "io",
            AppError::Parse { .. } => "parse",
            AppError::Csv(_) => "csv",
            AppError::Json(_) => "json",
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
            #[serde(skip_serializing_if = "Option::is_none")]
            row: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            epoch: Option<usize>,
        }
        let row = match self {
            AppError::Parse { row, .. } => Some(*row),
            _ => None,
        };
        let epoch = match self {
            AppError::Core(synthanom_core::Error::TrainingFailure { epoch, .. }) => Some(*epoch),
            _ => None,
        };
        serde_json::to_string(&Out { error: self.kind(), message: self.to_string(), exit_code: self.exit_code(), row, epoch })
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}
