//! The phase × operation × mode conformance table.

use std::sync::Arc;

use super::START_MS;
use penloop_core::ledger::Payload;
use penloop_core::protocol::{
    AbstractionInput, Articulation, Gate, GovernedSession, RationaleSummary,
    ReasoningMode, ReflectionAction, SessionConfig, UncertaintyLevel, UncertaintySpan,
};
use penloop_core::{Actor, ManualClock, Phase, ProtocolError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Start {
    Abstraction,
    Articulation,
    Reflection,
    ReflectionAccepted,
    Finalized,
    Aborted,
}

pub const STARTS: [Start; 6] = [
    Start::Abstraction,
    Start::Articulation,
    Start::Reflection,
    Start::ReflectionAccepted,
    Start::Finalized,
    Start::Aborted,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Abstraction,
    Articulation,
    Accept,
    Challenge,
    Revise,
    Tag,
    Branch,
    RequestCounterexample,
    Finalize,
    Abort,
}

pub const OPS: [Op; 10] = [
    Op::Abstraction,
    Op::Articulation,
    Op::Accept,
    Op::Challenge,
    Op::Revise,
    Op::Tag,
    Op::Branch,
    Op::RequestCounterexample,
    Op::Finalize,
    Op::Abort,
];

pub fn rationale() -> RationaleSummary {
    RationaleSummary::new("the moon drives tides").with_uncertainty("solar share unquantified")
}

pub fn session_in(start: Start, mode: ReasoningMode) -> GovernedSession {
    let clock = Arc::new(ManualClock::new(START_MS, 1_000));
    let mut s = GovernedSession::create("t", SessionConfig::new(mode), clock, None).unwrap();
    if start == Start::Abstraction {
        return s;
    }
    s.submit_abstraction(AbstractionInput::new("the moon causes tides")).unwrap();
    if start == Start::Articulation {
        return s;
    }
    s.record_articulation(Articulation::plain("Tides follow the moon.", "t")).unwrap();
    match start {
        Start::Reflection => {}
        Start::ReflectionAccepted => {
            s.submit_reflection(ReflectionAction::Accept).unwrap();
        }
        Start::Finalized => {
            // challenge + tag + accept meets every default policy
            s.submit_reflection(ReflectionAction::Challenge { counter_evidence: "neap tides".into() })
                .unwrap();
            s.record_articulation(Articulation::plain("The sun contributes too.", "t")).unwrap();
            s.submit_reflection(ReflectionAction::TagUncertainty {
                span: UncertaintySpan::new(0, 3, UncertaintyLevel::Medium),
                target_event: 3,
            })
            .unwrap();
            s.submit_reflection(ReflectionAction::Accept).unwrap();
            s.request_finalization(rationale()).unwrap();
        }
        Start::Aborted => {
            s.abort("stop").unwrap();
        }
        _ => unreachable!(),
    }
    s
}

fn apply(s: &mut GovernedSession, op: Op) -> Result<(), ProtocolError> {
    let reflect = |s: &mut GovernedSession, a| s.submit_reflection(a).map(drop);
    match op {
        Op::Abstraction => s.submit_abstraction(AbstractionInput::new("a new draft")).map(drop),
        Op::Articulation => s.record_articulation(Articulation::plain("model text", "t")).map(drop),
        Op::Accept => reflect(s, ReflectionAction::Accept),
        Op::Challenge => reflect(s, ReflectionAction::Challenge { counter_evidence: "spring tides".into() }),
        Op::Revise => reflect(s, ReflectionAction::Revise { new_draft: "the moon and sun cause tides".into() }),
        Op::Tag => reflect(
            s,
            ReflectionAction::TagUncertainty {
                span: UncertaintySpan::new(0, 5, UncertaintyLevel::Low),
                target_event: 3,
            },
        ),
        Op::Branch => reflect(s, ReflectionAction::Branch { alternative_draft: "wind causes tides".into() }),
        Op::RequestCounterexample => reflect(s, ReflectionAction::RequestCounterexample),
        Op::Finalize => s.request_finalization(rationale()).map(drop),
        Op::Abort => s.abort("enough").map(drop),
    }
}

#[derive(Debug, PartialEq)]
enum Expect {
    /// Next phase, iteration delta, whether a new branch becomes active,
    /// expected accepted flag.
    Moves(Phase, u32, bool, bool),
    WrongPhase,
    Unmet(Vec<Gate>),
}

fn default_unmet(mode: ReasoningMode, accepted: bool) -> Vec<Gate> {
    // Depth, falsification and tags are all zero in the enumerated states.
    let mut gates = match mode {
        ReasoningMode::Creative | ReasoningMode::Low => vec![],
        ReasoningMode::Medium => vec![Gate::ReflectionDepth],
        ReasoningMode::High => vec![Gate::ReflectionDepth, Gate::FalsificationEvents, Gate::UncertaintyTags],
    };
    if mode != ReasoningMode::Creative && !accepted {
        gates.push(Gate::HumanAccept);
    }
    gates
}

fn expected(start: Start, op: Op, mode: ReasoningMode) -> Expect {
    use Expect::*;
    match (start, op) {
        (Start::Finalized | Start::Aborted, _) => WrongPhase,
        (_, Op::Abort) => Moves(Phase::Aborted, 0, false, false),
        (Start::Abstraction, Op::Abstraction) => Moves(Phase::Articulation, 1, false, false),
        (Start::Articulation, Op::Articulation) => Moves(Phase::Reflection, 0, false, false),
        (Start::Abstraction | Start::Articulation, _) => WrongPhase,
        (_, Op::Abstraction | Op::Articulation) => WrongPhase,
        (_, Op::Accept) => Moves(Phase::Reflection, 0, false, true),
        (s, Op::Tag) => Moves(Phase::Reflection, 0, false, s == Start::ReflectionAccepted),
        (_, Op::Challenge | Op::RequestCounterexample) => Moves(Phase::Articulation, 0, false, false),
        (_, Op::Revise) => Moves(Phase::Articulation, 1, false, false),
        (_, Op::Branch) => Moves(Phase::Articulation, 1, true, false),
        (s, Op::Finalize) => {
            let unmet = default_unmet(mode, s == Start::ReflectionAccepted);
            if unmet.is_empty() {
                Moves(Phase::Finalized, 0, false, s == Start::ReflectionAccepted)
            } else {
                Unmet(unmet)
            }
        }
    }
}

fn non_cue(events: &[penloop_core::TraceEvent]) -> Vec<&penloop_core::TraceEvent> {
    events.iter().filter(|e| !matches!(e.payload, Payload::FrictionCue(_))).collect()
}


/// Check every (mode, start, operation) case; returns the case count.
pub fn check_all() -> usize {
    let mut cases = 0;
    for mode in ReasoningMode::ALL {
        for start in STARTS {
            for op in OPS {
                let mut s = session_in(start, mode);
                let before = s.session().clone();
                let len = s.events().len();
                let result = apply(&mut s, op);
                let after = s.session();
                let case = format!("{mode} {start:?} {op:?}");
                match expected(start, op, mode) {
                    Expect::WrongPhase => {
                        assert!(matches!(result, Err(ProtocolError::WrongPhase { .. })), "{case}: {result:?}");
                        assert_eq!(s.events().len(), len, "{case}");
                        assert_eq!(after, &before, "{case}");
                    }
                    Expect::Unmet(gates) => {
                        match result {
                            Err(ProtocolError::PolicyViolation { unmet, .. }) => assert_eq!(unmet, gates, "{case}"),
                            other => panic!("{case}: {other:?}"),
                        }
                        assert_eq!(non_cue(&s.events()[len..]).len(), 0, "{case}");
                        assert_eq!(after.phase, before.phase, "{case}");
                    }
                    Expect::Moves(phase, iteration, new_branch, accepted) => {
                        assert!(result.is_ok(), "{case}: {result:?}");
                        assert_eq!(after.phase, phase, "{case}");
                        assert_eq!(after.iteration, before.iteration + iteration, "{case}");
                        assert_eq!(after.active_branch != before.active_branch, new_branch, "{case}");
                        assert_eq!(after.branches.len(), before.branches.len() + usize::from(new_branch), "{case}");
                        assert_eq!(after.accepted, accepted, "{case}");
                        let appended = non_cue(&s.events()[len..]);
                        assert_eq!(appended.len(), 1, "{case}: one record per accepted move");
                        let actor = if op == Op::Articulation { Actor::Model } else { Actor::Human };
                        assert_eq!(appended[0].actor, actor, "{case}");
                    }
                }
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 4 * 6 * 10);
    cases
}
