use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use super::markers::parse_markers;
use super::{Backend, BackendError, GenerationRequest};
use crate::protocol::Articulation;

/// Read a script file: a JSON list of reply strings.
pub fn load_script(path: &Path) -> Result<Vec<String>, BackendError> {
    let bytes = std::fs::read(path).map_err(|e| {
        BackendError::InvalidConfig(format!("cannot read script {}: {e}", path.display()))
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        BackendError::InvalidConfig(format!("script {} is not a JSON list of strings: {e}", path.display()))
    })
}

/// Replays a fixed list of replies. Each session has its own cursor, which
/// advances only when a reply is successfully produced.
#[derive(Debug)]
pub struct ScriptedBackend {
    id: String,
    replies: Vec<String>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ScriptedBackend {
    pub fn new(replies: Vec<String>) -> Self {
        ScriptedBackend::with_id("scripted", replies)
    }

    pub fn with_id(id: impl Into<String>, replies: Vec<String>) -> Self {
        ScriptedBackend {
            id: id.into(),
            replies,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Replies already consumed by `session_id`.
    pub fn consumed(&self, session_id: &str) -> usize {
        let cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        cursors.get(session_id).copied().unwrap_or(0)
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Articulation, BackendError> {
        let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        let cursor = cursors.entry(request.session_id.clone()).or_insert(0);
        let raw = self.replies.get(*cursor).ok_or_else(|| BackendError::ScriptExhausted {
            session_id: request.session_id.clone(),
            consumed: *cursor,
        })?;
        let (output_text, uncertainty_cues) = parse_markers(raw)?;
        *cursor += 1;
        Ok(Articulation {
            output_text,
            uncertainty_cues,
            backend_id: self.id.clone(),
            latency_ms: 0,
        })
    }
}
