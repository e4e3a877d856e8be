use serde::Serialize;
use stratdetect_core::{Error as CoreError, ErrorCategory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Document { path: String, message: String },
    #[error("unknown reviewer id {0:?}")]
    UnknownReviewer(String),
    #[error("unknown work id {0:?}")]
    UnknownWork(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{0}")]
    Config(String),
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            AppError::Core(e) => e.category(),
            AppError::Parse { .. }
            | AppError::Document { .. }
            | AppError::UnknownReviewer(_)
            | AppError::UnknownWork(_)
            | AppError::DuplicateId(_) => ErrorCategory::Validation,
            AppError::Io { .. } | AppError::InvalidGrid(_) | AppError::Config(_) => {
                ErrorCategory::Config
            }
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::Io { .. } => "Io",
            AppError::Parse { .. } => "ParseError",
            AppError::Document { .. } => "MalformedDocument",
            AppError::UnknownReviewer(_) => "UnknownReviewer",
            AppError::UnknownWork(_) => "UnknownWork",
            AppError::DuplicateId(_) => "DuplicateId",
            AppError::InvalidGrid(_) => "InvalidGrid",
            AppError::Config(_) => "ConfigError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Validation => 2,
            ErrorCategory::Infeasible => 3,
            ErrorCategory::Config => 4,
        }
    }

    /// Machine-readable form. Reviewer and work indices are translated to
    /// file ids when `ids` is given.
    pub fn report(&self, ids: Option<&crate::formats::Ids>) -> ErrorReport {
        let (reviewer, work) = match self {
            AppError::Core(e) => (
                e.reviewer()
                    .map(|r| ids.map_or(r.to_string(), |ids| ids.reviewer(r).to_string())),
                e.work()
                    .map(|w| ids.map_or(w.to_string(), |ids| ids.work(w).to_string())),
            ),
            AppError::UnknownReviewer(r) => (Some(r.clone()), None),
            AppError::UnknownWork(w) => (None, Some(w.clone())),
            _ => (None, None),
        };
        ErrorReport {
            error: self.code(),
            category: match self.category() {
                ErrorCategory::Validation => "validation",
                ErrorCategory::Infeasible => "infeasible",
                ErrorCategory::Config => "config",
            },
            message: self.to_string(),
            reviewer,
            work,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub category: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work: Option<String>,
}
