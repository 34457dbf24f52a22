use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use skillarena_core::aggregation::AggregationError;
use skillarena_core::tournament::TournamentError;

/// Error body: `{"code": "...", "message": "...", ...details}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), details: None }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body(&self) -> Value {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let (Some(Value::Object(extra)), Value::Object(map)) = (&self.details, &mut body) {
            for (k, v) in extra {
                map.insert(k.clone(), v.clone());
            }
        }
        body
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<TournamentError> for ApiError {
    fn from(e: TournamentError) -> Self {
        let status = match &e {
            TournamentError::UnqualifiedWorker(_) => StatusCode::FORBIDDEN,
            TournamentError::UnknownPair(_) => StatusCode::NOT_FOUND,
            TournamentError::UnresolvedPairs { .. }
            | TournamentError::RoundAlreadyOpen(_)
            | TournamentError::NoOpenRound
            | TournamentError::MaxRoundsReached(_)
            | TournamentError::PairClosed(_)
            | TournamentError::DuplicateVote { .. } => StatusCode::CONFLICT,
            TournamentError::Aggregation(AggregationError::NoDifferenceDisabled) => StatusCode::UNPROCESSABLE_ENTITY,
            TournamentError::Replay { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let details = match &e {
            TournamentError::UnresolvedPairs { count } => Some(json!({ "open_pairs": count })),
            _ => None,
        };
        ApiError { status, code: e.code(), message: e.to_string(), details }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(format!("storage: {e}"))
    }
}

impl From<AggregationError> for ApiError {
    fn from(e: AggregationError) -> Self {
        TournamentError::from(e).into()
    }
}
