use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::policy::{FrictionTrigger, Gate, ModePolicy, PolicyOverride};
use super::types::{
    char_len, AbstractionInput, Articulation, BranchId, FrictionCue, Phase, RationaleSummary,
    ReasoningMode, ReflectionAction,
};
use super::ProtocolError;
use crate::clock::Clock;
use crate::decimal::Fixed4;
use crate::ledger::{
    export_jsonl, AbortRecord, AbstractionRecord, Actor, ArticulationRecord, Chain, EventSink,
    Payload, ReflectionRecord, SessionHeader, TraceEvent,
};
use crate::metrics::{Theta, TraceTally};

/// Parameters fixed when a session is created.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub mode: ReasoningMode,
    pub policy_override: Option<PolicyOverride>,
    pub theta: Theta,
}

impl SessionConfig {
    pub fn new(mode: ReasoningMode) -> Self {
        SessionConfig {
            mode,
            policy_override: None,
            theta: Theta::DEFAULT,
        }
    }

    pub fn with_policy(mut self, policy: PolicyOverride) -> Self {
        self.policy_override = Some(policy);
        self
    }

    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.theta = theta;
        self
    }
}

/// Loop state of one session, reconstructible from its trace alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Session {
    pub session_id: String,
    pub mode: ReasoningMode,
    pub policy: ModePolicy,
    pub theta: Theta,
    pub phase: Phase,
    /// Human drafts so far: the initial abstraction plus every Revise and Branch.
    pub iteration: u32,
    pub active_branch: BranchId,
    /// Branches in creation order.
    pub branches: Vec<BranchId>,
    /// Whether the active branch's current content has been accepted.
    pub accepted: bool,
    pub created_at_ms: u64,
}

impl Session {
    fn from_header(session_id: &str, header: &SessionHeader, created_at_ms: u64) -> Self {
        Session {
            session_id: session_id.to_string(),
            mode: header.mode,
            policy: header.policy.clone(),
            theta: header.theta,
            phase: Phase::Abstraction,
            iteration: 0,
            active_branch: header.root_branch.clone(),
            branches: vec![header.root_branch.clone()],
            accepted: false,
            created_at_ms,
        }
    }

    /// Advance the state by one recorded event. Shared by live operations
    /// (after validation) and by replay of a stored trace.
    fn apply(&mut self, payload: &Payload) -> Result<(), String> {
        let expect = |want: Phase, phase: Phase| {
            if phase == want {
                Ok(())
            } else {
                Err(format!("a {} event cannot occur in phase {phase}", payload.kind()))
            }
        };
        match payload {
            Payload::SessionHeader(_) => return Err("duplicate session header".into()),
            Payload::Abstraction(_) => {
                expect(Phase::Abstraction, self.phase)?;
                self.iteration += 1;
                self.phase = Phase::Articulation;
            }
            Payload::Articulation(_) => {
                expect(Phase::Articulation, self.phase)?;
                self.phase = Phase::Reflection;
            }
            Payload::FrictionCue(_) => {}
            Payload::Reflection(record) => {
                expect(Phase::Reflection, self.phase)?;
                match &record.action {
                    ReflectionAction::Accept => self.accepted = true,
                    ReflectionAction::TagUncertainty { .. } => {}
                    ReflectionAction::Challenge { .. } | ReflectionAction::RequestCounterexample => {
                        self.accepted = false;
                        self.phase = Phase::Articulation;
                    }
                    ReflectionAction::Revise { .. } => {
                        self.accepted = false;
                        self.iteration += 1;
                        self.phase = Phase::Articulation;
                    }
                    ReflectionAction::Branch { .. } => {
                        let new_branch = record
                            .new_branch
                            .clone()
                            .ok_or("branch event without new_branch")?;
                        if self.branches.contains(&new_branch) {
                            return Err(format!("branch {new_branch} already exists"));
                        }
                        self.branches.push(new_branch.clone());
                        self.active_branch = new_branch;
                        self.accepted = false;
                        self.iteration += 1;
                        self.phase = Phase::Articulation;
                    }
                }
            }
            Payload::Rationale(_) => {
                expect(Phase::Reflection, self.phase)?;
                self.phase = Phase::Finalized;
            }
            Payload::Abort(_) => {
                if self.phase.is_terminal() {
                    return Err("abort after a terminal event".into());
                }
                self.accepted = false;
                self.phase = Phase::Aborted;
            }
        }
        Ok(())
    }

    fn next_branch_id(&self) -> BranchId {
        BranchId(format!("b{}", self.branches.len()))
    }
}

/// A session bound to its trace. Every accepted operation appends exactly one
/// actor event (plus any system friction cues); rejected operations append
/// nothing, except that a refused finalization still records the cues the
/// attempt triggered.
pub struct GovernedSession {
    state: Session,
    chain: Chain,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for GovernedSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GovernedSession")
            .field("state", &self.state)
            .field("chain", &self.chain)
            .finish()
    }
}

impl GovernedSession {
    /// Open a session and write its genesis header.
    pub fn create(
        session_id: impl Into<String>,
        config: SessionConfig,
        clock: Arc<dyn Clock>,
        sink: Option<Box<dyn EventSink>>,
    ) -> Result<Self, ProtocolError> {
        let policy = match &config.policy_override {
            Some(o) => o.validate().map_err(ProtocolError::InvalidPolicy)?,
            None => ModePolicy::default_for(config.mode),
        };
        let header = SessionHeader {
            mode: config.mode,
            policy,
            theta: config.theta,
            root_branch: BranchId::root(),
        };
        let session_id = session_id.into();
        let mut chain = Chain::new(session_id.clone(), sink);
        let ts = clock.now_ms();
        let created_at_ms = chain
            .append(ts, Phase::Abstraction, Actor::System, Payload::SessionHeader(header.clone()))?
            .ts_ms;
        Ok(GovernedSession {
            state: Session::from_header(&session_id, &header, created_at_ms),
            chain,
            clock,
        })
    }

    /// Rebuild a session by replaying a verified trace.
    pub fn restore(
        events: Vec<TraceEvent>,
        clock: Arc<dyn Clock>,
        sink: Option<Box<dyn EventSink>>,
    ) -> Result<Self, ProtocolError> {
        let state = replay(&events)?;
        let sealed = state.phase.is_terminal();
        let chain = Chain::from_events(events, sealed, sink)?;
        Ok(GovernedSession { state, chain, clock })
    }

    pub fn session(&self) -> &Session {
        &self.state
    }

    pub fn events(&self) -> &[TraceEvent] {
        self.chain.events()
    }

    pub fn tally(&self) -> TraceTally {
        TraceTally::from_events(self.events())
    }

    pub fn export_trace(&self) -> Vec<u8> {
        export_jsonl(self.events())
    }

    fn require(&self, operation: &'static str, phase: Phase) -> Result<(), ProtocolError> {
        if self.state.phase == phase {
            Ok(())
        } else {
            Err(ProtocolError::WrongPhase {
                operation,
                phase: self.state.phase,
            })
        }
    }

    fn record(&mut self, actor: Actor, payload: Payload) -> Result<(), ProtocolError> {
        let phase = self.state.phase;
        let ts = self.clock.now_ms();
        self.chain.append(ts, phase, actor, payload.clone())?;
        self.state.apply(&payload).map_err(ProtocolError::CorruptTrace)?;
        if self.state.phase.is_terminal() {
            self.chain.seal();
        }
        Ok(())
    }

    /// Cue events are tagged with the phase of the move that triggered them.
    fn emit_cue(&mut self, phase: Phase, cue: FrictionCue) -> Result<(), ProtocolError> {
        let ts = self.clock.now_ms();
        self.chain.append(ts, phase, Actor::System, Payload::FrictionCue(cue))?;
        Ok(())
    }

    pub fn submit_abstraction(&mut self, input: AbstractionInput) -> Result<&Session, ProtocolError> {
        self.require("submit_abstraction", Phase::Abstraction)?;
        if input.draft_text.trim().is_empty() {
            return Err(ProtocolError::EmptyDraft);
        }
        let stated_confidence = match input.stated_confidence {
            None => None,
            Some(c) if (0.0..=1.0).contains(&c) => {
                Some(Fixed4::from_f64(c).map_err(|_| ProtocolError::InvalidConfidence(c))?)
            }
            Some(c) => return Err(ProtocolError::InvalidConfidence(c)),
        };
        if let Some(parent) = &input.parent_branch {
            if !self.state.branches.contains(parent) {
                return Err(ProtocolError::UnknownBranch(parent.0.clone()));
            }
        }
        let record = AbstractionRecord {
            branch: self.state.active_branch.clone(),
            draft_text: input.draft_text,
            stated_confidence,
            parent_branch: input.parent_branch,
        };
        self.record(Actor::Human, Payload::Abstraction(record))?;
        Ok(&self.state)
    }

    /// Record the model's response and emit the friction cues the policy
    /// schedules after it, in schedule order.
    pub fn record_articulation(
        &mut self,
        articulation: Articulation,
    ) -> Result<Vec<FrictionCue>, ProtocolError> {
        self.require("record_articulation", Phase::Articulation)?;
        let len = char_len(&articulation.output_text);
        if let Some(span) = articulation.uncertainty_cues.iter().find(|s| !s.fits(len)) {
            return Err(ProtocolError::SpanOutOfBounds {
                start: span.start,
                end: span.end,
                len,
            });
        }
        let record = ArticulationRecord {
            branch: self.state.active_branch.clone(),
            output_text: articulation.output_text,
            uncertainty_cues: articulation.uncertainty_cues,
            backend_id: articulation.backend_id,
            latency_ms: articulation.latency_ms,
        };
        self.record(Actor::Model, Payload::Articulation(record))?;

        let tally = self.tally();
        let policy = &self.state.policy;
        let theta = self.state.theta;
        let first_of_iteration = is_first_articulation_of_iteration(self.events());
        let due: Vec<_> = policy
            .friction_schedule
            .iter()
            .filter(|scheduled| match scheduled.trigger {
                FrictionTrigger::ArticulationUntilFalsificationMet => {
                    tally.falsification_count(theta) < policy.min_falsification_events
                }
                FrictionTrigger::ArticulationUntilUncertaintyMet => {
                    tally.uncertainty_tags < policy.min_uncertainty_tags
                }
                FrictionTrigger::FirstArticulationOfIteration => first_of_iteration,
                FrictionTrigger::FirstFinalizationAttempt
                | FrictionTrigger::FinalizationWithoutReflection => false,
            })
            .map(|scheduled| FrictionCue::new(scheduled.cue, self.state.iteration))
            .collect();
        for cue in &due {
            self.emit_cue(Phase::Articulation, cue.clone())?;
        }
        Ok(due)
    }

    pub fn submit_reflection(&mut self, action: ReflectionAction) -> Result<&Session, ProtocolError> {
        self.require("submit_reflection", Phase::Reflection)?;
        let mut new_branch = None;
        match &action {
            ReflectionAction::Accept | ReflectionAction::RequestCounterexample => {}
            ReflectionAction::Challenge { counter_evidence } => {
                nonempty(counter_evidence, "counter_evidence")?;
            }
            ReflectionAction::Revise { new_draft } => nonempty(new_draft, "new_draft")?,
            ReflectionAction::Branch { alternative_draft } => {
                nonempty(alternative_draft, "alternative_draft")?;
                new_branch = Some(self.state.next_branch_id());
            }
            ReflectionAction::TagUncertainty { span, target_event } => {
                let text = target_event
                    .checked_sub(1)
                    .and_then(|i| self.events().get(i as usize))
                    .and_then(|e| e.payload.annotatable_text())
                    .ok_or(ProtocolError::UnknownTarget(*target_event))?;
                let len = char_len(text);
                if !span.fits(len) {
                    return Err(ProtocolError::SpanOutOfBounds {
                        start: span.start,
                        end: span.end,
                        len,
                    });
                }
            }
        }
        let record = ReflectionRecord {
            branch: self.state.active_branch.clone(),
            action,
            new_branch,
        };
        self.record(Actor::Human, Payload::Reflection(record))?;
        Ok(&self.state)
    }

    /// Gates not yet met by the current trace. Pure.
    pub fn policy_gates(&self) -> Vec<Gate> {
        self.unmet_gates(&self.tally(), None)
    }

    /// Gates that would remain unmet if `rationale` were supplied now. Pure.
    pub fn policy_gates_with(&self, rationale: &RationaleSummary) -> Vec<Gate> {
        self.unmet_gates(&self.tally(), Some(rationale))
    }

    fn unmet_gates(&self, tally: &TraceTally, rationale: Option<&RationaleSummary>) -> Vec<Gate> {
        let s = &self.state;
        let p = &s.policy;
        let rationale_ok = !p.require_rationale
            || match rationale {
                Some(r) => rationale_is_complete(r, s.mode),
                None => tally.rationale_present,
            };
        let checks = [
            (Gate::ReflectionDepth, tally.reflection_depth() >= p.min_reflection_depth),
            (
                Gate::FalsificationEvents,
                tally.falsification_count(s.theta) >= p.min_falsification_events,
            ),
            (Gate::UncertaintyTags, tally.uncertainty_tags >= p.min_uncertainty_tags),
            (Gate::Rationale, rationale_ok),
            (Gate::HumanAccept, !p.require_human_accept || s.accepted),
        ];
        checks.into_iter().filter(|(_, ok)| !ok).map(|(g, _)| g).collect()
    }

    /// Close the session with a rationale if every gate holds.
    ///
    /// Finalization-time friction cues are recorded before the gates are
    /// judged, whether or not the attempt succeeds.
    pub fn request_finalization(
        &mut self,
        rationale: RationaleSummary,
    ) -> Result<Vec<FrictionCue>, ProtocolError> {
        self.require("request_finalization", Phase::Reflection)?;
        let len = self.events().len() as u64;
        if let Some(bad) = rationale.evidence_refs.iter().find(|r| **r == 0 || **r > len) {
            return Err(ProtocolError::DanglingEvidenceRef(*bad));
        }

        let tally = self.tally();
        let already_emitted = |kind| tally.cues.iter().any(|(_, k)| *k == kind);
        let due: Vec<FrictionCue> = self
            .state
            .policy
            .friction_schedule
            .iter()
            .filter(|scheduled| match scheduled.trigger {
                FrictionTrigger::FirstFinalizationAttempt => !already_emitted(scheduled.cue),
                FrictionTrigger::FinalizationWithoutReflection => {
                    tally.reflection_depth() == 0 && !already_emitted(scheduled.cue)
                }
                _ => false,
            })
            .map(|scheduled| FrictionCue::new(scheduled.cue, self.state.iteration))
            .collect();
        for cue in &due {
            self.emit_cue(Phase::Reflection, cue.clone())?;
        }

        let unmet = self.unmet_gates(&tally, Some(&rationale));
        if !unmet.is_empty() {
            return Err(ProtocolError::PolicyViolation { unmet, cues: due });
        }
        self.record(Actor::Human, Payload::Rationale(rationale))?;
        Ok(due)
    }

    pub fn abort(&mut self, reason: impl Into<String>) -> Result<&Session, ProtocolError> {
        if self.state.phase.is_terminal() {
            return Err(ProtocolError::WrongPhase {
                operation: "abort_session",
                phase: self.state.phase,
            });
        }
        self.record(Actor::Human, Payload::Abort(AbortRecord { reason: reason.into() }))?;
        Ok(&self.state)
    }
}

fn nonempty(text: &str, field: &'static str) -> Result<(), ProtocolError> {
    if text.trim().is_empty() {
        Err(ProtocolError::EmptyPayload(field))
    } else {
        Ok(())
    }
}

/// A rationale counts toward the gate when it has a conclusion and, in modes
/// that demand it, a statement of residual uncertainty.
pub(crate) fn rationale_is_complete(r: &RationaleSummary, mode: ReasoningMode) -> bool {
    !r.conclusion.trim().is_empty()
        && (!mode.requires_uncertainty_statement() || !r.uncertainty_statement.trim().is_empty())
}

/// True when the last event is the only articulation since the latest human
/// draft.
fn is_first_articulation_of_iteration(events: &[TraceEvent]) -> bool {
    let mut articulations = 0;
    for event in events.iter().rev() {
        match &event.payload {
            Payload::Articulation(_) => articulations += 1,
            Payload::Abstraction(_) => break,
            Payload::Reflection(r) if r.action.draft().is_some() => break,
            _ => {}
        }
    }
    articulations == 1
}

/// Reconstruct session state from a trace that starts with its header.
pub(crate) fn replay(events: &[TraceEvent]) -> Result<Session, ProtocolError> {
    let first = events
        .first()
        .ok_or_else(|| ProtocolError::CorruptTrace("empty trace".into()))?;
    let Payload::SessionHeader(header) = &first.payload else {
        return Err(ProtocolError::CorruptTrace("first event is not a session header".into()));
    };
    let mut state = Session::from_header(&first.session_id, header, first.ts_ms);
    for event in &events[1..] {
        if state.phase.is_terminal() {
            return Err(ProtocolError::CorruptTrace(format!(
                "event {} follows a terminal event",
                event.seq
            )));
        }
        state
            .apply(&event.payload)
            .map_err(|e| ProtocolError::CorruptTrace(format!("event {}: {e}", event.seq)))?;
    }
    Ok(state)
}

impl GovernedSession {
    /// Replay a trace into session state without adopting the chain.
    pub fn replay_state(events: &[TraceEvent]) -> Result<Session, ProtocolError> {
        replay(events)
    }
}
