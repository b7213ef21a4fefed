use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::markers::parse_markers;
use super::{Backend, BackendConfig, BackendError, GenerationRequest};
use crate::protocol::Articulation;

/// Posts `{model, messages}` to a chat-style endpoint and reads the reply
/// text from `response_path`.
pub struct HttpBackend {
    config: BackendConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model_name", &self.config.model_name)
            .field("timeout_ms", &self.config.timeout_ms)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    pub fn new(config: BackendConfig, token: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, token, agent }
    }

    pub fn request_body(&self, request: &GenerationRequest) -> Value {
        let messages: Vec<Value> = request
            .prompt_context
            .iter()
            .map(|line| json!({"role": line.role.chat_role(), "content": line.text}))
            .collect();
        json!({
            "model": self.config.model_name.clone().unwrap_or_default(),
            "messages": messages,
        })
    }

    fn map_error(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.config.timeout_ms),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                BackendError::Timeout(self.config.timeout_ms)
            }
            ureq::Error::StatusCode(code) => BackendError::HttpStatus(code),
            other => BackendError::Unreachable(other.to_string()),
        }
    }
}

/// Follow a dot-separated path through objects and arrays.
pub(crate) fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(value, |v, segment| match v {
        Value::Array(items) => segment.parse::<usize>().ok().and_then(|i| items.get(i)),
        Value::Object(map) => map.get(segment),
        _ => None,
    })
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        self.config.model_name.as_deref().unwrap_or("http")
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Articulation, BackendError> {
        let endpoint = self
            .config
            .endpoint
            .as_deref()
            .ok_or_else(|| BackendError::InvalidConfig("endpoint: missing".into()))?;
        let body = serde_json::to_vec(&self.request_body(request)).expect("json values serialize");
        let mut call = self.agent.post(endpoint).header("content-type", "application/json");
        if let Some(token) = &self.token {
            call = call.header("authorization", format!("Bearer {token}"));
        }
        let started = Instant::now();
        let mut response = call.send(&body[..]).map_err(|e| self.map_error(e))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus(status));
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| match self.map_error(e) {
                BackendError::Unreachable(msg) => BackendError::MalformedResponse(msg),
                other => other,
            })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let json: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::MalformedResponse(format!("body is not JSON: {e}")))?;
        let raw = lookup(&json, &self.config.response_path)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                BackendError::MalformedResponse(format!(
                    "no text at `{}`",
                    self.config.response_path
                ))
            })?;
        let (output_text, uncertainty_cues) = parse_markers(raw)?;
        Ok(Articulation {
            output_text,
            uncertainty_cues,
            backend_id: self.id().to_string(),
            latency_ms,
        })
    }
}
