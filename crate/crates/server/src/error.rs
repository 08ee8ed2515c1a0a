use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use lifegen_core::dataset::DatasetError;
use lifegen_core::pipeline::PipelineError;

/// JSON error body. `code` values are stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::RunNotFound(_) => Self::not_found(msg),
            PipelineError::NotAwaitingReview { .. } => Self::new(StatusCode::CONFLICT, "not_awaiting_review", msg),
            PipelineError::StageMismatch { .. } => Self::new(StatusCode::BAD_REQUEST, "stage_mismatch", msg),
            PipelineError::EmptyIntent | PipelineError::InvalidTarget(_) => Self::invalid_body(msg),
            PipelineError::Store(_) | PipelineError::Prompt(_) => Self::internal(msg),
        }
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        let msg = e.to_string();
        match e {
            DatasetError::DuplicateDecision { .. } => Self::new(StatusCode::CONFLICT, "duplicate_decision", msg),
            _ => Self::internal(msg),
        }
    }
}
