//! Multi-session host: per-session serialized mutation, parallel sessions,
//! optional file-backed persistence, and backend-driven articulation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use crate::backend::{Backend, BackendError, GenerationRequest};
use crate::clock::{Clock, IdSource};
use crate::ledger::{audit_report, AuditReport, EventSink, FileStore, LedgerError, TraceEvent};
use crate::metrics::{compute_session_metrics, MetricsError, RqiWeights, SessionMetrics};
use crate::protocol::{
    AbstractionInput, Articulation, FrictionCue, Gate, GovernedSession, ProtocolError,
    RationaleSummary, ReflectionAction, Session, SessionConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is busy with another mutation")]
    ConcurrentMutation(String),
    #[error("no articulation backend is configured")]
    NoBackend,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnknownSession(_) => "NotFound",
            EngineError::ConcurrentMutation(_) => "ConcurrentMutation",
            EngineError::NoBackend => "NoBackend",
            EngineError::Protocol(e) => e.code(),
            EngineError::Backend(e) => e.code(),
            EngineError::Ledger(e) => e.code(),
            EngineError::Metrics(e) => e.code(),
        }
    }
}

/// What a second mutation on a busy session does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Contention {
    /// Queue behind the running mutation.
    #[default]
    Wait,
    /// Fail fast with [`EngineError::ConcurrentMutation`].
    Reject,
}

struct SessionSlot {
    /// Held for the whole of a mutating operation, including backend calls.
    mutation: Mutex<()>,
    /// Held only while reading or applying state, so queries never wait on
    /// a backend.
    state: RwLock<GovernedSession>,
}

/// Result of a backend-driven articulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArticulateOutcome {
    pub articulation: Articulation,
    pub cues: Vec<FrictionCue>,
    pub session: Session,
}

pub struct Engine {
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    store: Option<FileStore>,
    backend: Option<Arc<dyn Backend>>,
    include_mode: bool,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdSource>,
    contention: Contention,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("sessions", &self.read_sessions().len())
            .field("store", &self.store)
            .field("backend", &self.backend.as_ref().map(|b| b.id().to_string()))
            .field("contention", &self.contention)
            .finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Engine {
    /// An in-memory engine.
    pub fn new(clock: Arc<dyn Clock>, ids: Arc<dyn IdSource>) -> Self {
        Engine {
            sessions: RwLock::new(HashMap::new()),
            store: None,
            backend: None,
            include_mode: true,
            clock,
            ids,
            contention: Contention::Wait,
        }
    }

    /// An engine persisting every trace under `store`, reloading the
    /// sessions already there.
    pub fn open(store: FileStore, clock: Arc<dyn Clock>, ids: Arc<dyn IdSource>) -> Result<Self, EngineError> {
        let mut sessions = HashMap::new();
        for id in store.session_ids()? {
            let events = store.load(&id)?;
            let sink: Box<dyn EventSink> = Box::new(store.reopen_sink(&id)?);
            let session = GovernedSession::restore(events, clock.clone(), Some(sink))?;
            sessions.insert(id, Arc::new(new_slot(session)));
        }
        let mut engine = Engine::new(clock, ids);
        engine.sessions = RwLock::new(sessions);
        engine.store = Some(store);
        Ok(engine)
    }

    pub fn with_backend(mut self, backend: Arc<dyn Backend>, include_mode: bool) -> Self {
        self.backend = Some(backend);
        self.include_mode = include_mode;
        self
    }

    pub fn with_contention(mut self, contention: Contention) -> Self {
        self.contention = contention;
        self
    }

    pub fn store(&self) -> Option<&FileStore> {
        self.store.as_ref()
    }

    fn read_sessions(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, Arc<SessionSlot>>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner())
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, EngineError> {
        self.read_sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    fn begin<'a>(&self, id: &str, slot: &'a SessionSlot) -> Result<MutexGuard<'a, ()>, EngineError> {
        match self.contention {
            Contention::Wait => Ok(lock(&slot.mutation)),
            Contention::Reject => match slot.mutation.try_lock() {
                Ok(guard) => Ok(guard),
                Err(TryLockError::Poisoned(e)) => Ok(e.into_inner()),
                Err(TryLockError::WouldBlock) => Err(EngineError::ConcurrentMutation(id.to_string())),
            },
        }
    }

    /// Run a mutating operation under the session's serialization lock.
    fn mutate<R>(
        &self,
        id: &str,
        op: impl FnOnce(&mut GovernedSession) -> Result<R, ProtocolError>,
    ) -> Result<R, EngineError> {
        let slot = self.slot(id)?;
        let _guard = self.begin(id, &slot)?;
        let mut state = slot.state.write().unwrap_or_else(|e| e.into_inner());
        Ok(op(&mut state)?)
    }

    fn query<R>(&self, id: &str, op: impl FnOnce(&GovernedSession) -> R) -> Result<R, EngineError> {
        let slot = self.slot(id)?;
        let state = slot.state.read().unwrap_or_else(|e| e.into_inner());
        Ok(op(&state))
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<Session, EngineError> {
        let id = self.ids.next_id();
        if self.read_sessions().contains_key(&id) {
            return Err(LedgerError::StorageFailure(format!("session id {id} already in use")).into());
        }
        let sink: Option<Box<dyn EventSink>> = match &self.store {
            Some(store) => Some(Box::new(store.create_session(&id)?)),
            None => None,
        };
        let session = GovernedSession::create(id.clone(), config, self.clock.clone(), sink)?;
        let snapshot = session.session().clone();
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        sessions.insert(id, Arc::new(new_slot(session)));
        Ok(snapshot)
    }

    /// Session ids in no particular order.
    pub fn session_ids(&self) -> Vec<String> {
        self.read_sessions().keys().cloned().collect()
    }

    pub fn session(&self, id: &str) -> Result<Session, EngineError> {
        self.query(id, |s| s.session().clone())
    }

    pub fn submit_abstraction(&self, id: &str, input: AbstractionInput) -> Result<Session, EngineError> {
        self.mutate(id, |s| s.submit_abstraction(input).cloned())
    }

    pub fn record_articulation(
        &self,
        id: &str,
        articulation: Articulation,
    ) -> Result<(Vec<FrictionCue>, Session), EngineError> {
        self.mutate(id, |s| {
            let cues = s.record_articulation(articulation)?;
            Ok((cues, s.session().clone()))
        })
    }

    /// Ask the backend for an articulation and record it. The session stays
    /// locked against other mutations for the duration, but queries and
    /// other sessions proceed. On backend failure nothing is recorded.
    pub fn articulate(&self, id: &str) -> Result<ArticulateOutcome, EngineError> {
        let backend = self.backend.clone().ok_or(EngineError::NoBackend)?;
        let slot = self.slot(id)?;
        let _guard = self.begin(id, &slot)?;
        let request = {
            let state = slot.state.read().unwrap_or_else(|e| e.into_inner());
            let phase = state.session().phase;
            if phase != crate::protocol::Phase::Articulation {
                return Err(ProtocolError::WrongPhase {
                    operation: "articulate",
                    phase,
                }
                .into());
            }
            GenerationRequest::from_trace(state.events(), &state.session().active_branch, self.include_mode)
        };
        let articulation = backend.generate(&request)?;
        let mut state = slot.state.write().unwrap_or_else(|e| e.into_inner());
        let cues = state.record_articulation(articulation.clone())?;
        Ok(ArticulateOutcome {
            articulation,
            cues,
            session: state.session().clone(),
        })
    }

    pub fn submit_reflection(&self, id: &str, action: ReflectionAction) -> Result<Session, EngineError> {
        self.mutate(id, |s| s.submit_reflection(action).cloned())
    }

    pub fn request_finalization(
        &self,
        id: &str,
        rationale: RationaleSummary,
    ) -> Result<(Vec<FrictionCue>, Session), EngineError> {
        self.mutate(id, |s| {
            let cues = s.request_finalization(rationale)?;
            Ok((cues, s.session().clone()))
        })
    }

    pub fn abort(&self, id: &str, reason: &str) -> Result<Session, EngineError> {
        self.mutate(id, |s| s.abort(reason).cloned())
    }

    pub fn gates(&self, id: &str) -> Result<Vec<Gate>, EngineError> {
        self.query(id, GovernedSession::policy_gates)
    }

    pub fn events(&self, id: &str) -> Result<Vec<TraceEvent>, EngineError> {
        self.query(id, |s| s.events().to_vec())
    }

    pub fn export_trace(&self, id: &str) -> Result<Vec<u8>, EngineError> {
        self.query(id, GovernedSession::export_trace)
    }

    pub fn metrics(
        &self,
        id: &str,
        accuracy: Option<f64>,
        weights: Option<RqiWeights>,
    ) -> Result<SessionMetrics, EngineError> {
        let (events, theta) = self.query(id, |s| (s.events().to_vec(), s.session().theta))?;
        Ok(compute_session_metrics(&events, theta, accuracy, weights)?)
    }

    pub fn audit(&self, id: &str) -> Result<AuditReport, EngineError> {
        let events = self.events(id)?;
        Ok(audit_report(&events)?)
    }
}

fn new_slot(session: GovernedSession) -> SessionSlot {
    SessionSlot {
        mutation: Mutex::new(()),
        state: RwLock::new(session),
    }
}
