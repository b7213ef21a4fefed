use std::fmt;

use super::event::{Actor, Payload, TraceEvent, GENESIS_HASH};
use super::verify::{verify_chain, ChainStatus};
use super::LedgerError;
use crate::protocol::Phase;

/// Durable destination for appended events.
pub trait EventSink: Send + Sync {
    /// Must not return before `line` is durable.
    fn persist(&mut self, event: &TraceEvent, line: &str) -> std::io::Result<()>;
}

/// The in-memory hash chain of one session, optionally mirrored to a sink.
pub struct Chain {
    session_id: String,
    events: Vec<TraceEvent>,
    sealed: bool,
    sink: Option<Box<dyn EventSink>>,
}

impl fmt::Debug for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chain")
            .field("session_id", &self.session_id)
            .field("events", &self.events.len())
            .field("sealed", &self.sealed)
            .field("persistent", &self.sink.is_some())
            .finish()
    }
}

impl Chain {
    pub fn new(session_id: impl Into<String>, sink: Option<Box<dyn EventSink>>) -> Self {
        Chain {
            session_id: session_id.into(),
            events: Vec::new(),
            sealed: false,
            sink,
        }
    }

    /// Adopt an existing, already persisted trace. The chain must verify.
    pub fn from_events(
        events: Vec<TraceEvent>,
        sealed: bool,
        sink: Option<Box<dyn EventSink>>,
    ) -> Result<Self, LedgerError> {
        match verify_chain(&events)? {
            ChainStatus::Intact => {}
            ChainStatus::Broken { first_break } => {
                return Err(LedgerError::Malformed {
                    line: first_break,
                    reason: "hash chain broken".into(),
                })
            }
        }
        Ok(Chain {
            session_id: events[0].session_id.clone(),
            events,
            sealed,
            sink,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn append(
        &mut self,
        ts_ms: u64,
        phase: Phase,
        actor: Actor,
        payload: Payload,
    ) -> Result<&TraceEvent, LedgerError> {
        if self.sealed {
            return Err(LedgerError::SessionSealed(self.session_id.clone()));
        }
        let (prev_hash, ts_floor) = match self.events.last() {
            Some(last) => (last.hash.clone(), last.ts_ms),
            None => (GENESIS_HASH.to_string(), 0),
        };
        let mut event = TraceEvent {
            seq: self.events.len() as u64 + 1,
            session_id: self.session_id.clone(),
            // timestamps never run backwards within a session
            ts_ms: ts_ms.max(ts_floor),
            phase,
            actor,
            payload,
            prev_hash,
            hash: String::new(),
        };
        event.hash = event.compute_hash();
        if let Some(sink) = self.sink.as_mut() {
            sink.persist(&event, &event.to_line())
                .map_err(|e| LedgerError::StorageFailure(e.to_string()))?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }
}
