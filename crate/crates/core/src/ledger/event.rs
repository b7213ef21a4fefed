use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::decimal::Fixed4;
use crate::metrics::Theta;
use crate::protocol::{
    BranchId, FrictionCue, ModePolicy, Phase, RationaleSummary, ReasoningMode, ReflectionAction,
    UncertaintySpan,
};

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Human,
    Model,
    System,
}

impl Actor {
    pub fn as_str(self) -> &'static str {
        match self {
            Actor::Human => "human",
            Actor::Model => "model",
            Actor::System => "system",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionHeader {
    pub mode: ReasoningMode,
    pub policy: ModePolicy,
    pub theta: Theta,
    pub root_branch: BranchId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionRecord {
    pub branch: BranchId,
    pub draft_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_confidence: Option<Fixed4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_branch: Option<BranchId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArticulationRecord {
    pub branch: BranchId,
    pub output_text: String,
    pub uncertainty_cues: Vec<UncertaintySpan>,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectionRecord {
    pub branch: BranchId,
    pub action: ReflectionAction,
    /// Set only for `branch` actions: the branch the alternative draft opens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_branch: Option<BranchId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortRecord {
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    SessionHeader(SessionHeader),
    Abstraction(AbstractionRecord),
    Articulation(ArticulationRecord),
    Reflection(ReflectionRecord),
    FrictionCue(FrictionCue),
    Rationale(RationaleSummary),
    Abort(AbortRecord),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::SessionHeader(_) => "session_header",
            Payload::Abstraction(_) => "abstraction",
            Payload::Articulation(_) => "articulation",
            Payload::Reflection(_) => "reflection",
            Payload::FrictionCue(_) => "friction_cue",
            Payload::Rationale(_) => "rationale",
            Payload::Abort(_) => "abort",
        }
    }

    /// Free text carried by the payload that a span may annotate: drafts and
    /// articulations.
    pub fn annotatable_text(&self) -> Option<&str> {
        match self {
            Payload::Abstraction(a) => Some(&a.draft_text),
            Payload::Articulation(a) => Some(&a.output_text),
            Payload::Reflection(r) => r.action.draft(),
            _ => None,
        }
    }
}

/// One immutable entry of a session's reasoning trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub seq: u64,
    pub session_id: String,
    pub ts_ms: u64,
    pub phase: Phase,
    pub actor: Actor,
    pub payload: Payload,
    pub prev_hash: String,
    pub hash: String,
}

#[derive(Serialize)]
struct HashedFields<'a> {
    seq: u64,
    session_id: &'a str,
    ts_ms: u64,
    phase: Phase,
    actor: Actor,
    payload: &'a Payload,
    prev_hash: &'a str,
}

impl TraceEvent {
    /// Canonical bytes of every field except `hash`.
    pub fn hashed_bytes(&self) -> Vec<u8> {
        canonical::to_vec(&HashedFields {
            seq: self.seq,
            session_id: &self.session_id,
            ts_ms: self.ts_ms,
            phase: self.phase,
            actor: self.actor,
            payload: &self.payload,
            prev_hash: &self.prev_hash,
        })
        .expect("trace events carry no floating point")
    }

    pub fn compute_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.prev_hash.as_bytes());
        hasher.update(self.hashed_bytes());
        hex::encode(hasher.finalize())
    }

    /// The canonical export line, without the trailing newline.
    pub fn to_line(&self) -> String {
        canonical::to_string(self).expect("trace events carry no floating point")
    }
}
