#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use penloop_core::backend::{Backend, ScriptedBackend};
use penloop_core::engine::Contention;
use penloop_core::protocol::{
    AbstractionInput, RationaleSummary, ReasoningMode, ReflectionAction, SessionConfig, UncertaintyLevel,
    UncertaintySpan,
};
use penloop_core::{Engine, ManualClock, SequentialIds};
use penloop_service::{router, ApiConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const START_MS: u64 = 1_700_000_000_000;

pub fn script() -> Vec<String> {
    [
        "Tides follow the moon ⟦unc:medium⟧almost entirely⟧.",
        "Spring tides show the sun adds a smaller pull.",
        "Both bodies matter; ⟦unc:high⟧the solar share is near half the lunar⟧.",
        "The moon dominates and the sun modulates the range.",
        "On the alternative branch, wind setup is a weather effect, not a tide.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Deterministic engine: manual clock, sequential ids, a scripted backend.
pub fn engine_with(backend: Arc<dyn Backend>) -> Engine {
    Engine::new(Arc::new(ManualClock::new(START_MS, 1_000)), Arc::new(SequentialIds::new("s")))
        .with_backend(backend, true)
        .with_contention(Contention::Reject)
}

pub fn scripted_engine() -> Engine {
    engine_with(Arc::new(ScriptedBackend::new(script())))
}

pub fn app(engine: Arc<Engine>) -> Router {
    router(engine, ApiConfig::default())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut request = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            request = request.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[derive(Clone, Debug)]
pub enum Step {
    Abstraction(AbstractionInput),
    Articulate,
    Reflect(ReflectionAction),
    Finalize(RationaleSummary),
    Abort(String),
}

/// A High-mode history touching every endpoint kind, including refused
/// finalizations (which still record cues) and a wrong-phase call.
pub fn scenario() -> Vec<Step> {
    use ReflectionAction::*;
    let rationale = || {
        RationaleSummary::new("the moon dominates tides")
            .with_uncertainty("the solar share was not measured")
    };
    vec![
        Step::Abstraction(AbstractionInput::new("The moon causes tides.").with_confidence(0.7)),
        Step::Articulate,
        Step::Finalize(rationale()),
        Step::Reflect(Challenge { counter_evidence: "Spring and neap tides track the sun.".into() }),
        Step::Reflect(Accept),
        Step::Articulate,
        Step::Reflect(TagUncertainty {
            span: UncertaintySpan::new(0, 12, UncertaintyLevel::Medium),
            target_event: 8,
        }),
        Step::Reflect(Revise { new_draft: "The moon and the sun together cause tides.".into() }),
        Step::Articulate,
        Step::Reflect(RequestCounterexample),
        Step::Articulate,
        Step::Reflect(Accept),
        Step::Finalize(rationale()),
    ]
}

/// An abandoned branch-and-abort history.
pub fn branch_scenario() -> Vec<Step> {
    vec![
        Step::Abstraction(AbstractionInput::new("Wind causes tides.")),
        Step::Articulate,
        Step::Reflect(ReflectionAction::Branch { alternative_draft: "Storm surge is not a tide.".into() }),
        Step::Articulate,
        Step::Abort("off topic".into()),
    ]
}

/// Outcome code per step: "ok" or the error code.
pub fn drive_engine(engine: &Engine, mode: ReasoningMode, steps: &[Step]) -> (String, Vec<String>) {
    let id = engine.create_session(SessionConfig::new(mode)).unwrap().session_id;
    let outcomes = steps
        .iter()
        .map(|step| {
            let result = match step.clone() {
                Step::Abstraction(input) => engine.submit_abstraction(&id, input).map(drop),
                Step::Articulate => engine.articulate(&id).map(drop),
                Step::Reflect(action) => engine.submit_reflection(&id, action).map(drop),
                Step::Finalize(r) => engine.request_finalization(&id, r).map(drop),
                Step::Abort(reason) => engine.abort(&id, &reason).map(drop),
            };
            match result {
                Ok(()) => "ok".to_string(),
                Err(e) => e.code().to_string(),
            }
        })
        .collect();
    (id, outcomes)
}

pub async fn drive_api(app: &Router, mode: ReasoningMode, steps: &[Step]) -> (String, Vec<String>) {
    let (status, created) = call_json(app, "POST", "/v1/sessions", Some(json!({ "mode": mode }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap().to_string();
    let mut outcomes = Vec::new();
    for step in steps {
        let (path, body) = match step {
            Step::Abstraction(input) => ("abstraction", Some(serde_json::to_value(input).unwrap())),
            Step::Articulate => ("articulate", None),
            Step::Reflect(action) => ("reflection", Some(serde_json::to_value(action).unwrap())),
            Step::Finalize(r) => ("finalize", Some(serde_json::to_value(r).unwrap())),
            Step::Abort(reason) => ("abort", Some(json!({ "reason": reason }))),
        };
        let (status, value) = call_json(app, "POST", &format!("/v1/sessions/{id}/{path}"), body).await;
        outcomes.push(if status.is_success() {
            "ok".to_string()
        } else {
            value["code"].as_str().unwrap().to_string()
        });
    }
    (id, outcomes)
}

/// Run both scenarios in-process and over HTTP; return the two sets of
/// exported traces and step outcomes.
pub async fn equivalence_run() -> Vec<((Vec<u8>, Vec<String>), (Vec<u8>, Vec<String>))> {
    let mut pairs = Vec::new();
    for (mode, steps) in [(ReasoningMode::High, scenario()), (ReasoningMode::Medium, branch_scenario())] {
        let direct = scripted_engine();
        let (id, direct_outcomes) = drive_engine(&direct, mode, &steps);
        let direct_trace = direct.export_trace(&id).unwrap();

        let engine = Arc::new(scripted_engine());
        let app = app(engine.clone());
        let (id, api_outcomes) = drive_api(&app, mode, &steps).await;
        let (status, api_trace) = call(&app, "GET", &format!("/v1/sessions/{id}/trace"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(api_trace, engine.export_trace(&id).unwrap());
        pairs.push(((direct_trace, direct_outcomes), (api_trace, api_outcomes)));
    }
    pairs
}
