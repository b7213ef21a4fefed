//! The phase state machine: human abstraction, model articulation, human
//! reflection, closed by a gated finalization.
//!
//! | phase        | accepted operations                                          |
//! |--------------|--------------------------------------------------------------|
//! | abstraction  | submit_abstraction → articulation; abort                     |
//! | articulation | record_articulation → reflection; abort                      |
//! | reflection   | accept, tag_uncertainty (stay); challenge, request_counterexample, revise, branch → articulation; finalize → finalized if gates met; abort |
//! | finalized    | none                                                         |
//! | aborted      | none                                                         |

mod policy;
mod session;
mod types;

pub use policy::{FrictionTrigger, Gate, ModePolicy, PolicyOverride, ScheduledCue};
pub use session::{GovernedSession, Session, SessionConfig};
pub(crate) use session::rationale_is_complete;
pub use types::{
    char_len, AbstractionInput, Articulation, BranchId, Confidence, FrictionCue, FrictionCueKind,
    Phase, RationaleSummary, ReasoningMode, ReflectionAction, UncertaintyLevel, UncertaintySpan,
};

use crate::ledger::LedgerError;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{operation} is not allowed in phase {phase}")]
    WrongPhase { operation: &'static str, phase: Phase },
    #[error("draft text is empty")]
    EmptyDraft,
    #[error("stated confidence {0} is outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("unknown branch {0}")]
    UnknownBranch(String),
    #[error("span {start}..{end} does not fit a text of {len} characters")]
    SpanOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("event {0} does not exist or cannot be annotated")]
    UnknownTarget(u64),
    #[error("{0} must not be empty")]
    EmptyPayload(&'static str),
    #[error("finalization gates unmet: {}", join_gates(unmet))]
    PolicyViolation {
        unmet: Vec<Gate>,
        /// Cues the attempt itself triggered (already recorded in the trace).
        cues: Vec<FrictionCue>,
    },
    #[error("evidence reference {0} does not resolve to an event")]
    DanglingEvidenceRef(u64),
    #[error("trace cannot be replayed: {0}")]
    CorruptTrace(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

fn join_gates(gates: &[Gate]) -> String {
    gates.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(", ")
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::InvalidPolicy(_) => "InvalidPolicy",
            ProtocolError::WrongPhase { .. } => "WrongPhase",
            ProtocolError::EmptyDraft => "EmptyDraft",
            ProtocolError::InvalidConfidence(_) => "InvalidConfidence",
            ProtocolError::UnknownBranch(_) => "UnknownBranch",
            ProtocolError::SpanOutOfBounds { .. } => "SpanOutOfBounds",
            ProtocolError::UnknownTarget(_) => "UnknownTarget",
            ProtocolError::EmptyPayload(_) => "EmptyPayload",
            ProtocolError::PolicyViolation { .. } => "PolicyViolation",
            ProtocolError::DanglingEvidenceRef(_) => "DanglingEvidenceRef",
            ProtocolError::CorruptTrace(_) => "CorruptTrace",
            ProtocolError::Ledger(e) => e.code(),
        }
    }
}
