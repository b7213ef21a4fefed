//! Random legal sessions driven from a byte string, for property tests.

use std::sync::Arc;

use penloop_core::ledger::Payload;
use penloop_core::protocol::{
    AbstractionInput, Articulation, GovernedSession, ModePolicy, PolicyOverride, ProtocolError,
    RationaleSummary, ReasoningMode, ReflectionAction, SessionConfig, UncertaintyLevel,
    UncertaintySpan,
};
use penloop_core::ManualClock;

use super::oracle;

const WORDS: [&str; 12] = [
    "aspirin", "stroke", "risk", "bleeding", "trial", "dose", "age", "benefit", "harm", "evidence",
    "patients", "low",
];

fn words(seed: u8, count: usize) -> String {
    (0..count)
        .map(|i| WORDS[(seed as usize * 7 + i * 5) % WORDS.len()])
        .collect::<Vec<_>>()
        .join(" ")
}

fn draft(seed: u8) -> String {
    let mut text = words(seed, 1 + seed as usize % 6);
    if seed % 3 == 0 {
        text.push('.');
    }
    text
}

fn level(seed: u8) -> UncertaintyLevel {
    [UncertaintyLevel::Low, UncertaintyLevel::Medium, UncertaintyLevel::High][seed as usize % 3]
}

#[derive(Clone, Debug)]
pub struct FinalizeCheck {
    pub succeeded: bool,
    /// `policy_gates_with` was empty before the attempt.
    pub gates_empty: bool,
    /// Independent verdict: oracle counts over the exported trace, the
    /// rationale rule, and the accepted flag.
    pub oracle_ok: bool,
}

#[derive(Clone, Debug)]
pub struct Step {
    pub op: &'static str,
    pub ok: bool,
    pub appended: usize,
    pub human_appended: usize,
    pub finalize: Option<FinalizeCheck>,
}

pub struct Walk {
    pub session: GovernedSession,
    pub steps: Vec<Step>,
}

impl std::fmt::Debug for Walk {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let trace = String::from_utf8_lossy(&self.session.export_trace()).into_owned();
        f.debug_struct("Walk").field("steps", &self.steps).field("trace", &trace).finish()
    }
}

pub const MODES: [ReasoningMode; 4] = [
    ReasoningMode::Creative,
    ReasoningMode::Low,
    ReasoningMode::Medium,
    ReasoningMode::High,
];

/// Mode and optional policy minimums picked from the header bytes.
pub fn config(mode_byte: u8, policy: Option<[u8; 3]>) -> SessionConfig {
    let mode = MODES[mode_byte as usize % 4];
    let config = SessionConfig::new(mode);
    match policy {
        None => config,
        Some([d, f, u]) => {
            let mut p = ModePolicy::default_for(mode);
            p.min_reflection_depth = u32::from(d % 4);
            p.min_falsification_events = u32::from(f % 3);
            p.min_uncertainty_tags = u32::from(u % 3);
            config.with_policy(PolicyOverride::from(&p))
        }
    }
}

fn oracle_verdict(s: &GovernedSession, rationale: &RationaleSummary) -> bool {
    let state = s.session();
    let p = &state.policy;
    let events = oracle::parse_jsonl(&s.export_trace());
    let m = oracle::recompute(&events);
    let rationale_ok = !p.require_rationale
        || (!rationale.conclusion.trim().is_empty()
            && (!matches!(state.mode, ReasoningMode::Medium | ReasoningMode::High)
                || !rationale.uncertainty_statement.trim().is_empty()));
    m.reflection_depth >= p.min_reflection_depth
        && m.falsification_events >= p.min_falsification_events
        && m.uncertainty_tag_count >= p.min_uncertainty_tags
        && rationale_ok
        && (!p.require_human_accept || state.accepted)
}

fn latest_text_event(s: &GovernedSession, articulation: bool) -> Option<(u64, u64)> {
    s.events().iter().rev().find_map(|e| {
        let text = match (&e.payload, articulation) {
            (Payload::Articulation(a), true) => &a.output_text,
            (Payload::Abstraction(a), false) => &a.draft_text,
            _ => return None,
        };
        Some((e.seq, text.chars().count() as u64))
    })
}

pub fn walk(config: SessionConfig, choices: &[u8]) -> Walk {
    let clock = Arc::new(ManualClock::new(super::START_MS, 1_000));
    let mut s = GovernedSession::create("walk", config, clock, None).unwrap();
    let mut steps = Vec::new();
    let mut bytes = choices.iter().copied().chain(std::iter::repeat(0)).take(choices.len());
    while let Some(c) = bytes.next() {
        let phase = s.session().phase;
        if phase.is_terminal() {
            break;
        }
        let aux = bytes.next().unwrap_or(c);
        let before = s.events().len();
        let mut finalize = None;
        let (op, result): (&'static str, Result<(), ProtocolError>) = if c == 255 {
            ("abort", s.abort("walk abort").map(drop))
        } else {
            match phase {
                penloop_core::Phase::Abstraction => {
                    let mut input = AbstractionInput::new(draft(aux));
                    if aux % 2 == 0 {
                        input = input.with_confidence(f64::from(aux) / 255.0);
                    }
                    ("submit_abstraction", s.submit_abstraction(input).map(drop))
                }
                penloop_core::Phase::Articulation => {
                    let text = words(aux, 2 + aux as usize % 5);
                    let mut a = Articulation::plain(text, "walk");
                    if aux % 4 == 0 {
                        a.uncertainty_cues.push(UncertaintySpan::new(0, 3, level(aux)));
                    }
                    ("record_articulation", s.record_articulation(a).map(drop))
                }
                _ => reflect(&mut s, c, aux, &mut finalize),
            }
        };
        let appended = s.events().len() - before;
        let human_appended = s.events()[before..]
            .iter()
            .filter(|e| e.actor != penloop_core::Actor::System)
            .count();
        steps.push(Step {
            op,
            ok: result.is_ok(),
            appended,
            human_appended,
            finalize,
        });
    }
    Walk { session: s, steps }
}

fn reflect(
    s: &mut GovernedSession,
    c: u8,
    aux: u8,
    finalize: &mut Option<FinalizeCheck>,
) -> (&'static str, Result<(), ProtocolError>) {
    let action = match c % 16 {
        0..=3 => ReflectionAction::Accept,
        4 | 5 => ReflectionAction::Challenge {
            counter_evidence: words(aux, 3),
        },
        6 | 7 => ReflectionAction::Revise { new_draft: draft(aux) },
        8 | 9 => {
            let (seq, len) = latest_text_event(s, aux % 3 != 0).expect("a text event exists");
            ReflectionAction::TagUncertainty {
                span: UncertaintySpan::new(0, 1 + u64::from(aux) % len, level(aux)),
                target_event: seq,
            }
        }
        10 => ReflectionAction::Branch {
            alternative_draft: draft(aux.wrapping_add(1)),
        },
        11 => ReflectionAction::RequestCounterexample,
        15 if aux % 4 == 0 => return ("abort", s.abort("changed my mind").map(drop)),
        15 => ReflectionAction::Accept,
        _ => {
            let conclusion = if aux % 5 == 0 { String::new() } else { draft(aux) };
            let mut rationale = RationaleSummary::new(conclusion);
            if aux % 3 != 0 {
                rationale = rationale.with_uncertainty("some doubt remains");
            }
            let gates_empty = s.policy_gates_with(&rationale).is_empty();
            let oracle_ok = oracle_verdict(s, &rationale);
            let result = s.request_finalization(rationale).map(drop);
            *finalize = Some(FinalizeCheck {
                succeeded: result.is_ok(),
                gates_empty,
                oracle_ok,
            });
            return ("request_finalization", result);
        }
    };
    ("submit_reflection", s.submit_reflection(action).map(drop))
}
