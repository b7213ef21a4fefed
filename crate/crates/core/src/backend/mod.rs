//! Model articulation providers.
//!
//! [`ScriptedBackend`] replays canned replies and is fully deterministic;
//! [`HttpBackend`] posts the rendered conversation to a chat-style endpoint.
//! Neither retries: a failed call leaves the session in the articulation
//! phase so the caller can try again.

mod http;
mod markers;
mod scripted;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use http::HttpBackend;
pub use markers::{parse_markers, render_markers, MarkerError};
pub use scripted::{load_script, ScriptedBackend};

use crate::ledger::{Actor, Payload, TraceEvent};
use crate::protocol::{Articulation, BranchId, FrictionCueKind, ReasoningMode, ReflectionAction};

pub const TOKEN_ENV: &str = "PENLOOP_BACKEND_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("script exhausted after {consumed} replies for session {session_id}")]
    ScriptExhausted { session_id: String, consumed: usize },
    #[error("backend did not answer within {0} ms")]
    Timeout(u64),
    #[error("backend answered with HTTP status {0}")]
    HttpStatus(u16),
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

impl BackendError {
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::ScriptExhausted { .. } => "ScriptExhausted",
            BackendError::Timeout(_) => "BackendTimeout",
            BackendError::HttpStatus(_) => "BackendHTTPError",
            BackendError::Unreachable(_) => "BackendUnreachable",
            BackendError::MalformedResponse(_) => "MalformedResponse",
            BackendError::InvalidConfig(_) => "InvalidBackendConfig",
        }
    }
}

impl From<MarkerError> for BackendError {
    fn from(e: MarkerError) -> Self {
        BackendError::MalformedResponse(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextRole {
    Human,
    Model,
    System,
}

impl ContextRole {
    pub fn label(self) -> &'static str {
        match self {
            ContextRole::Human => "HUMAN",
            ContextRole::Model => "MODEL",
            ContextRole::System => "SYSTEM",
        }
    }

    /// Chat-completion role name.
    pub fn chat_role(self) -> &'static str {
        match self {
            ContextRole::Human => "user",
            ContextRole::Model => "assistant",
            ContextRole::System => "system",
        }
    }
}

impl From<Actor> for ContextRole {
    fn from(actor: Actor) -> Self {
        match actor {
            Actor::Human => ContextRole::Human,
            Actor::Model => ContextRole::Model,
            Actor::System => ContextRole::System,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContextLine {
    pub role: ContextRole,
    pub text: String,
}

impl ContextLine {
    pub fn render(&self) -> String {
        format!("{}: {}", self.role.label(), self.text)
    }
}

/// Everything a backend sees when asked to articulate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenerationRequest {
    pub session_id: String,
    pub branch: BranchId,
    /// Prior events in seq order.
    pub prompt_context: Vec<ContextLine>,
    pub current_draft: String,
    /// Cues emitted since the last articulation.
    pub pending_cues: Vec<FrictionCueKind>,
}

impl GenerationRequest {
    /// Build a request from a session's trace. With `include_mode` the
    /// governing mode is stated in the first context line.
    pub fn from_trace(events: &[TraceEvent], branch: &BranchId, include_mode: bool) -> Self {
        let session_id = events.first().map(|e| e.session_id.clone()).unwrap_or_default();
        let mut prompt_context = Vec::with_capacity(events.len());
        let mut current_draft = String::new();
        let mut pending_cues = Vec::new();
        for event in events {
            let text = match &event.payload {
                Payload::SessionHeader(h) => {
                    if !include_mode {
                        continue;
                    }
                    describe_mode(h.mode)
                }
                Payload::Abstraction(a) => {
                    if &a.branch == branch {
                        current_draft = a.draft_text.clone();
                    }
                    a.draft_text.clone()
                }
                Payload::Articulation(a) => {
                    pending_cues.clear();
                    a.output_text.clone()
                }
                Payload::FrictionCue(c) => {
                    pending_cues.push(c.cue);
                    c.text.clone()
                }
                Payload::Reflection(r) => {
                    if let (Some(draft), true) = (r.action.draft(), target_branch(r) == Some(branch)) {
                        current_draft = draft.to_string();
                    }
                    describe_action(&r.action)
                }
                Payload::Rationale(r) => format!("conclusion: {}", r.conclusion),
                Payload::Abort(a) => format!("abort: {}", a.reason),
            };
            prompt_context.push(ContextLine {
                role: event.actor.into(),
                text,
            });
        }
        GenerationRequest {
            session_id,
            branch: branch.clone(),
            prompt_context,
            current_draft,
            pending_cues,
        }
    }

    /// The context as "ROLE: text" lines.
    pub fn render(&self) -> String {
        let lines: Vec<String> = self.prompt_context.iter().map(ContextLine::render).collect();
        lines.join("\n")
    }
}

fn target_branch(r: &crate::ledger::ReflectionRecord) -> Option<&BranchId> {
    match r.action {
        ReflectionAction::Branch { .. } => r.new_branch.as_ref(),
        _ => Some(&r.branch),
    }
}

fn describe_mode(mode: ReasoningMode) -> String {
    format!("reasoning mode: {mode}")
}

fn describe_action(action: &ReflectionAction) -> String {
    match action {
        ReflectionAction::Accept => "accept".into(),
        ReflectionAction::Challenge { counter_evidence } => format!("challenge: {counter_evidence}"),
        ReflectionAction::Revise { new_draft } => format!("revise: {new_draft}"),
        ReflectionAction::TagUncertainty { span, target_event } => format!(
            "tag uncertainty {} on event {target_event} chars {}-{}",
            span.level, span.start, span.end
        ),
        ReflectionAction::Branch { alternative_draft } => format!("branch: {alternative_draft}"),
        ReflectionAction::RequestCounterexample => "request counterexample".into(),
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<Articulation, BackendError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_response_path() -> String {
    "choices.0.message.content".into()
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub backend_kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    /// Dot-separated path to the reply text in the endpoint's JSON answer;
    /// numeric segments index arrays.
    #[serde(default = "default_response_path")]
    pub response_path: String,
    /// State the session's reasoning mode in the rendered context.
    #[serde(default = "default_true")]
    pub include_mode: bool,
}

impl BackendConfig {
    pub fn scripted(script_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            backend_kind: BackendKind::Scripted,
            endpoint: None,
            model_name: None,
            timeout_ms: default_timeout_ms(),
            script_path: Some(script_path.into()),
            response_path: default_response_path(),
            include_mode: true,
        }
    }

    pub fn http(endpoint: impl Into<String>) -> Self {
        BackendConfig {
            backend_kind: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            script_path: None,
            ..BackendConfig::scripted("")
        }
    }

    /// Check the per-kind requirements. Errors name the offending key.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.timeout_ms == 0 {
            return Err(("timeout_ms", "must be positive".into()));
        }
        if self.response_path.is_empty() {
            return Err(("response_path", "must not be empty".into()));
        }
        match self.backend_kind {
            BackendKind::Http => {
                let endpoint = self.endpoint.as_deref().unwrap_or("");
                if endpoint.is_empty() {
                    return Err(("endpoint", "required for the http backend".into()));
                }
                if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                    return Err(("endpoint", format!("`{endpoint}` is not an http(s) URL")));
                }
            }
            BackendKind::Scripted => {
                if self.script_path.as_ref().is_none_or(|p| p.as_os_str().is_empty()) {
                    return Err(("script_path", "required for the scripted backend".into()));
                }
            }
        }
        Ok(())
    }

    /// Instantiate the configured backend. `token` is the bearer token for
    /// HTTP backends, normally read from [`TOKEN_ENV`].
    pub fn build(&self, token: Option<String>) -> Result<Arc<dyn Backend>, BackendError> {
        self.validate()
            .map_err(|(key, reason)| BackendError::InvalidConfig(format!("{key}: {reason}")))?;
        Ok(match self.backend_kind {
            BackendKind::Scripted => {
                let path = self.script_path.as_ref().expect("validated");
                Arc::new(ScriptedBackend::new(load_script(path)?))
            }
            BackendKind::Http => Arc::new(HttpBackend::new(self.clone(), token)),
        })
    }
}
