use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use qbrush_core::brushes::BrushError;
use qbrush_core::family_store::StoreError;
use serde_json::{json, Value};

/// Error body `{code, message, detail}` with its HTTP status.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what} `{id}`"),
        )
        .with_detail(json!({ "kind": what, "id": id }))
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body(&self) -> Value {
        json!({ "code": self.code, "message": self.message, "detail": self.detail })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<BrushError> for ApiError {
    fn from(e: BrushError) -> Self {
        let detail = match &e {
            BrushError::Region { role, .. } => json!({ "field": role }),
            BrushError::Param { name, .. } => json!({ "field": name }),
            BrushError::Stroke(_) => json!({ "field": "stroke" }),
            _ => Value::Null,
        };
        let code = match e {
            BrushError::Region { .. } => "invalid_region",
            BrushError::Stroke(_) => "invalid_stroke",
            BrushError::Param { .. } => "invalid_parameter",
            _ => "effect_failed",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string()).with_detail(detail)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::Empty(dir) => {
                Self::new(StatusCode::CONFLICT, "family_store_empty", e.to_string())
                    .with_detail(json!({ "data_dir": dir }))
            }
            StoreError::DistanceOutOfRange(d) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "distance_out_of_range",
                e.to_string(),
            )
            .with_detail(json!({ "field": "bond_distance", "value": d, "min": 0.725, "max": 2.5 })),
            _ => Self::internal(e.to_string()),
        }
    }
}
