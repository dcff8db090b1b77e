use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lpwp_core::session::SessionError;
use serde_json::{json, Map, Value};

/// A JSON error body `{code, message, ...}` with its status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub extra: Map<String, Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            extra: Map::new(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    pub fn body(&self) -> Value {
        let mut m = self.extra.clone();
        m.insert("code".into(), json!(self.code));
        m.insert("message".into(), json!(self.message));
        Value::Object(m)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let code = e.code().to_string();
        let status = match &e {
            SessionError::EmptyDescription | SessionError::InvalidEntity { .. } => StatusCode::BAD_REQUEST,
            SessionError::DescriptionTooLarge(_) => StatusCode::PAYLOAD_TOO_LARGE,
            SessionError::UnknownDeclaration(_) => StatusCode::NOT_FOUND,
            SessionError::Syntax(_) | SessionError::InvalidField { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Conflict { .. } => StatusCode::CONFLICT,
            SessionError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let err = ApiError::new(status, &code, message);
        match e {
            SessionError::Syntax(s) => err
                .with("tag", json!(s.tag))
                .with("offset", json!(s.offset))
                .with("reason", json!(s.reason)),
            SessionError::InvalidField { field, .. } => err.with("tag", json!(field)),
            SessionError::Conflict { missing_roles, .. } if !missing_roles.is_empty() => {
                err.with("missing_roles", json!(missing_roles))
            }
            _ => err,
        }
    }
}
