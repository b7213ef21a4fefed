use serde::Serialize;

use super::event::{Payload, TraceEvent};
use super::verify::verify_chain;
use super::LedgerError;
use crate::metrics::TraceTally;
use crate::protocol::{rationale_is_complete, Gate, Phase, ReasoningMode, ReflectionAction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GateStatus {
    pub gate: Gate,
    pub satisfied: bool,
}

/// What an auditor needs from one trace: chain integrity, the recorded
/// policy's gates judged against the recorded events, and the compliance
/// counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub session_id: String,
    pub chain_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_break: Option<u64>,
    pub mode: Option<ReasoningMode>,
    /// Phase after the last event.
    pub phase: Phase,
    pub gate_summary: Vec<GateStatus>,
    pub revision_count: u32,
    /// Human uncertainty tags plus spans the model marked in articulations.
    pub uncertainty_cue_count: u32,
    pub rationale_present: bool,
}

impl AuditReport {
    pub fn all_gates_satisfied(&self) -> bool {
        self.gate_summary.iter().all(|g| g.satisfied)
    }

    /// A finalized trace must show every recorded gate met; other terminal
    /// states carry no such obligation.
    pub fn terminal_state_consistent(&self) -> bool {
        self.phase != Phase::Finalized || self.all_gates_satisfied()
    }

    /// Chain intact and gates consistent with the terminal state.
    pub fn passes(&self) -> bool {
        self.chain_ok && self.mode.is_some() && self.terminal_state_consistent()
    }
}

pub fn audit_report(events: &[TraceEvent]) -> Result<AuditReport, LedgerError> {
    let first_break = match verify_chain(events) {
        Ok(status) => status.first_break(),
        Err(LedgerError::NonContiguousSeq { expected, .. }) => Some(expected),
        Err(e) => return Err(e),
    };
    let tally = TraceTally::from_events(events);
    let header = match &events[0].payload {
        Payload::SessionHeader(h) => Some(h),
        _ => None,
    };

    let mut accepted = false;
    let mut phase = Phase::Abstraction;
    let mut rationale_complete = false;
    for event in events {
        phase = event.phase;
        match &event.payload {
            Payload::Abstraction(_) => phase = Phase::Articulation,
            Payload::Articulation(_) => phase = Phase::Reflection,
            Payload::Reflection(r) => match r.action {
                ReflectionAction::Accept => accepted = true,
                ReflectionAction::TagUncertainty { .. } => {}
                _ => {
                    accepted = false;
                    phase = Phase::Articulation;
                }
            },
            Payload::Rationale(r) => {
                phase = Phase::Finalized;
                rationale_complete =
                    header.is_some_and(|h| rationale_is_complete(r, h.mode));
            }
            Payload::Abort(_) => {
                accepted = false;
                phase = Phase::Aborted;
            }
            Payload::SessionHeader(_) | Payload::FrictionCue(_) => {}
        }
    }

    let gate_summary = match header {
        None => Gate::ALL.iter().map(|&gate| GateStatus { gate, satisfied: false }).collect(),
        Some(h) => {
            let p = &h.policy;
            Gate::ALL
                .iter()
                .map(|&gate| {
                    let satisfied = match gate {
                        Gate::ReflectionDepth => tally.reflection_depth() >= p.min_reflection_depth,
                        Gate::FalsificationEvents => {
                            tally.falsification_count(h.theta) >= p.min_falsification_events
                        }
                        Gate::UncertaintyTags => tally.uncertainty_tags >= p.min_uncertainty_tags,
                        Gate::Rationale => !p.require_rationale || rationale_complete,
                        Gate::HumanAccept => !p.require_human_accept || accepted,
                    };
                    GateStatus { gate, satisfied }
                })
                .collect()
        }
    };

    Ok(AuditReport {
        session_id: events[0].session_id.clone(),
        chain_ok: first_break.is_none(),
        first_break,
        mode: header.map(|h| h.mode),
        phase,
        gate_summary,
        revision_count: tally.revisions.len() as u32,
        uncertainty_cue_count: tally.uncertainty_tags + tally.articulation_spans,
        rationale_present: tally.rationale_present,
    })
}
