//! HTTP JSON API over an [`Engine`].
//!
//! | method | path                          | engine call            |
//! |--------|-------------------------------|------------------------|
//! | POST   | /v1/sessions                  | create_session         |
//! | GET    | /v1/sessions/{id}             | session view           |
//! | POST   | /v1/sessions/{id}/abstraction | submit_abstraction     |
//! | POST   | /v1/sessions/{id}/articulate  | articulate (backend)   |
//! | POST   | /v1/sessions/{id}/reflection  | submit_reflection      |
//! | POST   | /v1/sessions/{id}/finalize    | request_finalization   |
//! | POST   | /v1/sessions/{id}/abort       | abort                  |
//! | GET    | /v1/sessions/{id}/gates       | gate checklist         |
//! | GET    | /v1/sessions/{id}/trace       | export_trace (JSONL)   |
//! | GET    | /v1/sessions/{id}/metrics     | metrics                |
//! | GET    | /v1/sessions/{id}/audit       | audit                  |
//!
//! Mutations on one session are serialized; a second concurrent mutation is
//! rejected with 409 `ConcurrentMutation`. GET requests never append events.

mod error;
mod view;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use penloop_core::backend::BackendError;
use penloop_core::config::{ConfigError, Settings};
use penloop_core::engine::Contention;
use penloop_core::ledger::FileStore;
use penloop_core::metrics::{RqiWeights, Theta};
use penloop_core::protocol::{
    AbstractionInput, PolicyOverride, RationaleSummary, ReasoningMode, ReflectionAction, SessionConfig,
};
use penloop_core::{Engine, EngineError, SystemClock, UuidIds};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

pub use error::{status_for, ApiError, STATUS_TABLE};
pub use view::{gate_report, pending_cues, GateReport, GateStatus, LatestArticulation, SessionView};

/// Settings the HTTP layer needs beyond the engine itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ApiConfig {
    pub auth_token: Option<String>,
    pub default_mode: ReasoningMode,
    pub theta: Theta,
    pub rqi_weights: RqiWeights,
}

impl From<&Settings> for ApiConfig {
    fn from(s: &Settings) -> Self {
        ApiConfig {
            auth_token: s.auth_token.clone(),
            default_mode: s.default_mode,
            theta: s.theta,
            rqi_weights: s.rqi_weights,
        }
    }
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig::from(&Settings::default())
    }
}

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    config: Arc<ApiConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("backend setup failed: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Config(_) => "ConfigError",
            ServiceError::Bind { .. } => "BindFailure",
            ServiceError::Backend(e) => e.code(),
            ServiceError::Engine(e) => e.code(),
            ServiceError::Io(_) => "ServerFailure",
        }
    }
}

/// The engine described by `settings`: wall clock, random ids, persistence
/// under `storage_dir` when set, and the configured backend.
pub fn build_engine(settings: &Settings) -> Result<Engine, ServiceError> {
    let clock = Arc::new(SystemClock);
    let ids = Arc::new(UuidIds);
    let mut engine = match &settings.storage_dir {
        Some(dir) => Engine::open(FileStore::open(dir).map_err(EngineError::from)?, clock, ids)?,
        None => Engine::new(clock, ids),
    };
    if let Some(backend) = &settings.backend {
        engine = engine.with_backend(backend.build(settings.backend_token.clone())?, true);
    }
    Ok(engine.with_contention(Contention::Reject))
}

/// The API routes. Mutations should run on an engine in
/// [`Contention::Reject`] mode to get the documented 409 behaviour.
pub fn router(engine: Arc<Engine>, config: ApiConfig) -> Router {
    let state = AppState {
        engine,
        config: Arc::new(config),
    };
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_view))
        .route("/v1/sessions/{id}/abstraction", post(abstraction))
        .route("/v1/sessions/{id}/articulate", post(articulate))
        .route("/v1/sessions/{id}/reflection", post(reflection))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/abort", post(abort))
        .route("/v1/sessions/{id}/gates", get(gates))
        .route("/v1/sessions/{id}/trace", get(trace))
        .route("/v1/sessions/{id}/metrics", get(metrics))
        .route("/v1/sessions/{id}/audit", get(audit))
        .fallback(|| async { ApiError::new("NotFound", "no such route") })
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// A bound listener with its routes, ready to run.
pub struct Server {
    listener: TcpListener,
    app: Router,
}

impl Server {
    pub async fn bind(settings: &Settings) -> Result<Self, ServiceError> {
        let engine = build_engine(settings)?;
        let listener = TcpListener::bind(settings.bind)
            .await
            .map_err(|source| ServiceError::Bind {
                addr: settings.bind,
                source,
            })?;
        Ok(Server {
            listener,
            app: router(Arc::new(engine), ApiConfig::from(settings)),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serve until `shutdown` resolves, then let in-flight requests finish.
    /// Every append is written through before its request returns, so
    /// nothing is left to flush afterwards.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}

pub async fn serve(settings: &Settings, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
    Server::bind(settings).await?.run(shutdown).await
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.config.auth_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new("Unauthorized", "missing or invalid bearer token").into_response();
        }
    }
    next.run(request).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Run a mutation off the async workers; backend calls may block.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, EngineError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(e) => Err(ApiError::new("Internal", format!("worker failed: {e}"))),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    mode: Option<ReasoningMode>,
    #[serde(default)]
    policy: Option<PolicyOverride>,
    #[serde(default)]
    theta: Option<f64>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        parse(&body)?
    };
    let mut config = SessionConfig::new(req.mode.unwrap_or(state.config.default_mode)).with_theta(state.config.theta);
    if let Some(theta) = req.theta {
        config = config.with_theta(Theta::new(theta).map_err(EngineError::from)?);
    }
    if let Some(policy) = req.policy {
        config = config.with_policy(policy);
    }
    let engine = state.engine.clone();
    let session = blocking(move || engine.create_session(config)).await?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn session_view(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(SessionView::load(&state.engine, &id)?))
}

async fn abstraction(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let input: AbstractionInput = parse(&body)?;
    let engine = state.engine.clone();
    let session = blocking(move || engine.submit_abstraction(&id, input)).await?;
    Ok(Json(session).into_response())
}

async fn articulate(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let engine = state.engine.clone();
    let outcome = blocking(move || engine.articulate(&id)).await?;
    let body = json!({
        "articulation": outcome.articulation,
        "cues": outcome.cues,
        "session": outcome.session,
    });
    Ok(Json(body).into_response())
}

async fn reflection(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let action: ReflectionAction = parse(&body)?;
    let engine = state.engine.clone();
    let session = blocking(move || engine.submit_reflection(&id, action)).await?;
    Ok(Json(session).into_response())
}

async fn finalize(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let rationale: RationaleSummary = parse(&body)?;
    let engine = state.engine.clone();
    let (cues, session) = blocking(move || engine.request_finalization(&id, rationale)).await?;
    Ok(Json(json!({ "cues": cues, "session": session })).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AbortRequest {
    reason: String,
}

async fn abort(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: AbortRequest = parse(&body)?;
    let engine = state.engine.clone();
    let session = blocking(move || engine.abort(&id, &req.reason)).await?;
    Ok(Json(session).into_response())
}

async fn gates(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<GateReport>, ApiError> {
    let session = state.engine.session(&id)?;
    let unmet = state.engine.gates(&id)?;
    Ok(Json(gate_report(&session.policy, unmet)))
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = state.engine.export_trace(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

/// `accuracy` is the only query parameter.
fn parse_accuracy(query: Option<&str>) -> Result<Option<f64>, ApiError> {
    let mut accuracy = None;
    for pair in query.unwrap_or("").split('&').filter(|p| !p.is_empty()) {
        match pair.split_once('=') {
            Some(("accuracy", v)) => {
                let value = v
                    .parse::<f64>()
                    .map_err(|_| ApiError::bad_request(format!("accuracy must be a number, got {v:?}")))?;
                accuracy = Some(value);
            }
            _ => return Err(ApiError::bad_request(format!("unknown query parameter {pair:?}"))),
        }
    }
    Ok(accuracy)
}

async fn metrics(
    State(state): State<AppState>,
    Path(id): Path<String>,
    RawQuery(query): RawQuery,
) -> Result<Response, ApiError> {
    let accuracy = parse_accuracy(query.as_deref())?;
    let m = state.engine.metrics(&id, accuracy, Some(state.config.rqi_weights))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], m.to_canonical_json()).into_response())
}

async fn audit(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let report = state.engine.audit(&id)?;
    Ok(Json(report).into_response())
}
