use penloop_core::ledger::Payload;
use penloop_core::protocol::{FrictionCue, Gate, ModePolicy, UncertaintySpan};
use penloop_core::{Engine, EngineError, Session, TraceEvent};
use serde::Serialize;

/// One row of the finalization checklist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GateStatus {
    pub gate: Gate,
    /// Whether the session's policy imposes this gate at all.
    pub required: bool,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GateReport {
    pub unmet: Vec<Gate>,
    pub checklist: Vec<GateStatus>,
}

fn required(policy: &ModePolicy, gate: Gate) -> bool {
    match gate {
        Gate::ReflectionDepth => policy.min_reflection_depth > 0,
        Gate::FalsificationEvents => policy.min_falsification_events > 0,
        Gate::UncertaintyTags => policy.min_uncertainty_tags > 0,
        Gate::Rationale => policy.require_rationale,
        Gate::HumanAccept => policy.require_human_accept,
    }
}

pub fn gate_report(policy: &ModePolicy, unmet: Vec<Gate>) -> GateReport {
    let checklist = Gate::ALL
        .iter()
        .map(|&gate| GateStatus {
            gate,
            required: required(policy, gate),
            satisfied: !unmet.contains(&gate),
        })
        .collect();
    GateReport { unmet, checklist }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LatestArticulation {
    pub seq: u64,
    pub output_text: String,
    pub uncertainty_cues: Vec<UncertaintySpan>,
    pub backend_id: String,
}

/// Everything a client needs to render one session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionView {
    pub session: Session,
    pub latest_articulation: Option<LatestArticulation>,
    /// Cues recorded since the latest articulation.
    pub pending_cues: Vec<FrictionCue>,
    pub gates: GateReport,
}

/// Friction cues recorded after the most recent articulation, oldest first.
pub fn pending_cues(events: &[TraceEvent]) -> Vec<FrictionCue> {
    let mut cues: Vec<FrictionCue> = events
        .iter()
        .rev()
        .take_while(|e| !matches!(e.payload, Payload::Articulation(_)))
        .filter_map(|e| match &e.payload {
            Payload::FrictionCue(c) => Some(c.clone()),
            _ => None,
        })
        .collect();
    cues.reverse();
    cues
}

impl SessionView {
    pub fn load(engine: &Engine, id: &str) -> Result<Self, EngineError> {
        let events = engine.events(id)?;
        let session = engine.session(id)?;
        let unmet = engine.gates(id)?;
        let latest_articulation = events.iter().rev().find_map(|e| match &e.payload {
            Payload::Articulation(a) => Some(LatestArticulation {
                seq: e.seq,
                output_text: a.output_text.clone(),
                uncertainty_cues: a.uncertainty_cues.clone(),
                backend_id: a.backend_id.clone(),
            }),
            _ => None,
        });
        Ok(SessionView {
            gates: gate_report(&session.policy, unmet),
            pending_cues: pending_cues(&events),
            latest_articulation,
            session,
        })
    }
}
