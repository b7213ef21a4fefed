use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use penloop_core::protocol::ProtocolError;
use penloop_core::EngineError;
use serde::Serialize;
use serde_json::{json, Value};

/// Every error code the API can return, with its HTTP status.
pub const STATUS_TABLE: &[(&str, u16)] = &[
    // request shape and validation
    ("BadRequest", 400),
    ("InvalidPolicy", 400),
    ("EmptyDraft", 400),
    ("InvalidConfidence", 400),
    ("UnknownBranch", 400),
    ("SpanOutOfBounds", 400),
    ("UnknownTarget", 400),
    ("EmptyPayload", 400),
    ("DanglingEvidenceRef", 400),
    ("BadWeights", 400),
    ("BadAccuracy", 400),
    ("BadThreshold", 400),
    ("TooFewPairs", 400),
    ("ZeroVariance", 400),
    ("LengthMismatch", 400),
    ("NotFinite", 400),
    ("Unauthorized", 401),
    ("NotFound", 404),
    ("UnknownSession", 404),
    // state conflicts
    ("WrongPhase", 409),
    ("PolicyViolation", 409),
    ("ConcurrentMutation", 409),
    ("NoArticulations", 409),
    ("SessionSealed", 410),
    // server-side faults
    ("StorageFailure", 500),
    ("CorruptTrace", 500),
    ("EmptyTrace", 500),
    ("NonContiguousSeq", 500),
    ("MalformedTrace", 500),
    ("Internal", 500),
    // backend failures
    ("NoBackend", 502),
    ("ScriptExhausted", 502),
    ("BackendTimeout", 502),
    ("BackendHTTPError", 502),
    ("BackendUnreachable", 502),
    ("MalformedResponse", 502),
    ("InvalidBackendConfig", 502),
];

/// Status for `code`; unknown codes are server faults.
pub fn status_for(code: &str) -> StatusCode {
    STATUS_TABLE
        .iter()
        .find(|(c, _)| *c == code)
        .and_then(|(_, s)| StatusCode::from_u16(*s).ok())
        .unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
}

/// The error body of every failed request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new("BadRequest", message)
    }

    pub fn status(&self) -> StatusCode {
        status_for(self.code)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let mut err = ApiError::new(e.code(), e.to_string());
        if let EngineError::Protocol(ProtocolError::PolicyViolation { unmet, cues }) = &e {
            err.details = Some(json!({ "unmet": unmet, "cues": cues }));
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
