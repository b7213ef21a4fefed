//! Append-only, phase-tagged, SHA-256 hash-chained reasoning traces.
//!
//! `hash = SHA-256(prev_hash || canonical(all fields except hash))`, hex
//! lowercase; the first event links to 64 ASCII zeros. The export format is
//! one canonical JSON event per line (`.trace.jsonl`).

mod audit;
mod chain;
mod event;
mod store;
mod verify;

pub use audit::{audit_report, AuditReport, GateStatus};
pub use chain::{Chain, EventSink};
pub use event::{
    AbortRecord, AbstractionRecord, Actor, ArticulationRecord, Payload, ReflectionRecord,
    SessionHeader, TraceEvent, GENESIS_HASH,
};
pub use store::{FileSink, FileStore, TRACE_EXTENSION};
pub use verify::{export_jsonl, import_jsonl, verify_chain, verify_jsonl, ChainStatus};

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("session {0} is sealed; no further events may be appended")]
    SessionSealed(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("sequence gap: expected seq {expected}, found {found}")]
    NonContiguousSeq { expected: u64, found: u64 },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: u64, reason: String },
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::SessionSealed(_) => "SessionSealed",
            LedgerError::StorageFailure(_) => "StorageFailure",
            LedgerError::EmptyTrace => "EmptyTrace",
            LedgerError::NonContiguousSeq { .. } => "NonContiguousSeq",
            LedgerError::UnknownSession(_) => "UnknownSession",
            LedgerError::Malformed { .. } => "MalformedTrace",
        }
    }
}
