use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use orderscope_core::analysis::AnalysisError;
use orderscope_core::dsl::MeasureError;
use orderscope_core::state_diagram::StateDiagramError;
use orderscope_core::EnsembleError;
use serde::Serialize;

/// Error body: `{"error": {"code": ..., "message": ..., ...}}`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                run: None,
                row: None,
                line: None,
                col: None,
            },
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<EnsembleError> for ApiError {
    fn from(e: EnsembleError) -> Self {
        let status = if e.is_not_found() {
            StatusCode::NOT_FOUND
        } else {
            StatusCode::BAD_REQUEST
        };
        let code = if status == StatusCode::NOT_FOUND {
            "not_found"
        } else {
            "validation"
        };
        let mut err = ApiError::new(status, code, e.to_string());
        err.body.run = e.run_id().map(str::to_string);
        err.body.row = e.row();
        err
    }
}

impl From<MeasureError> for ApiError {
    fn from(e: MeasureError) -> Self {
        let (status, code) = if e.is_compile_error() {
            (StatusCode::UNPROCESSABLE_ENTITY, "measure")
        } else {
            (StatusCode::UNPROCESSABLE_ENTITY, "measure_runtime")
        };
        let mut err = ApiError::new(status, code, e.message().to_string());
        if let Some(pos) = e.position() {
            err.body.line = Some(pos.line);
            err.body.col = Some(pos.col);
        }
        err
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis", e.to_string())
    }
}

impl From<StateDiagramError> for ApiError {
    fn from(e: StateDiagramError) -> Self {
        match e {
            StateDiagramError::EmptyCell { .. } | StateDiagramError::OutOfGrid { .. } => {
                ApiError::not_found(e.to_string())
            }
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "state_diagram", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Wrapper {
            error: ErrorBody,
        }
        (self.status, Json(Wrapper { error: self.body })).into_response()
    }
}
