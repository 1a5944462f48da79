use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use kda::repository::RepositoryError;
use serde::Serialize;

/// An HTTP error with a machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed", message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { code: self.code, message: &self.message })).into_response()
    }
}

impl From<RepositoryError> for ApiError {
    fn from(e: RepositoryError) -> Self {
        match e {
            RepositoryError::DuplicateId(_) => Self::new(StatusCode::CONFLICT, "duplicate_id", e.to_string()),
            RepositoryError::UnknownAlert(_) => Self::not_found("unknown_alert", e.to_string()),
            RepositoryError::AlertNotOpen { .. } => Self::new(StatusCode::CONFLICT, "already_decided", e.to_string()),
            RepositoryError::AlertExists(_) => Self::new(StatusCode::CONFLICT, "alert_exists", e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

impl From<kda::Error> for ApiError {
    fn from(e: kda::Error) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "engine", e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {}", .0.display(), .1)]
    File(PathBuf, std::io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] kda::Error),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
    #[error("unknown customer `{0}`")]
    UnknownPan(String),
    #[error("unknown transaction {0}")]
    UnknownTransaction(u64),
    #[error("repository is empty")]
    EmptyRepository,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
