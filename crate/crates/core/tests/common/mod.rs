#![allow(dead_code)]

pub mod criteria;
pub mod oracle;
pub mod random;
pub mod table;

use std::path::PathBuf;
use std::sync::Arc;

use penloop_core::backend::parse_markers;
use penloop_core::protocol::{
    AbstractionInput, Articulation, GovernedSession, RationaleSummary, ReasoningMode,
    ReflectionAction, SessionConfig, UncertaintyLevel, UncertaintySpan,
};
use penloop_core::ManualClock;

pub const START_MS: u64 = 1_700_000_000_000;

pub fn fixture(name: &str) -> PathBuf {
    // Resolves from any crate in the workspace.
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn articulation(marked: &str) -> Articulation {
    let (output_text, uncertainty_cues) = parse_markers(marked).unwrap();
    Articulation {
        output_text,
        uncertainty_cues,
        backend_id: "scripted".into(),
        latency_ms: 0,
    }
}

fn tag(start: u64, end: u64, level: UncertaintyLevel, target_event: u64) -> ReflectionAction {
    ReflectionAction::TagUncertainty {
        span: UncertaintySpan::new(start, end, level),
        target_event,
    }
}

fn challenge(text: &str) -> ReflectionAction {
    ReflectionAction::Challenge {
        counter_evidence: text.into(),
    }
}

/// The F1 session: High mode, θ = 0.2. With `extra_step` it becomes F1′,
/// which answers one more challenge before accepting.
pub fn build_f1_session(session_id: &str, extra_step: bool) -> GovernedSession {
    let clock = Arc::new(ManualClock::new(START_MS, 1_000));
    let mut s = GovernedSession::create(session_id, SessionConfig::new(ReasoningMode::High), clock, None).unwrap();
    s.submit_abstraction(AbstractionInput::new("Aspirin prevents strokes.").with_confidence(0.8))
        .unwrap();
    s.record_articulation(articulation(
        "Aspirin reduces the risk of some strokes ⟦unc:medium⟧by limiting clot formation⟧.",
    ))
    .unwrap();
    s.submit_reflection(ReflectionAction::Revise {
        new_draft: "Aspirin prevents ischemic strokes in high risk patients.".into(),
    })
    .unwrap();
    s.record_articulation(articulation(
        "In high risk patients aspirin lowers ischemic stroke rates ⟦unc:low⟧in trials⟧.",
    ))
    .unwrap();
    s.submit_reflection(challenge("Aspirin raises bleeding risk, so it fails for hemorrhagic stroke."))
        .unwrap();
    s.record_articulation(articulation(
        "The benefit holds for ischemic stroke only; ⟦unc:high⟧bleeding risk may outweigh it⟧ in some groups.",
    ))
    .unwrap();
    s.submit_reflection(tag(0, 11, UncertaintyLevel::Medium, 10)).unwrap();
    s.submit_reflection(tag(44, 73, UncertaintyLevel::High, 10)).unwrap();
    s.submit_reflection(tag(0, 21, UncertaintyLevel::Low, 7)).unwrap();
    if extra_step {
        s.submit_reflection(challenge("Bleeding risk also rises with age.")).unwrap();
        s.record_articulation(articulation("Older patients need an individual bleeding assessment."))
            .unwrap();
    }
    s.submit_reflection(ReflectionAction::Accept).unwrap();
    s.request_finalization(
        RationaleSummary::new("Aspirin prevents ischemic strokes in high risk patients.")
            .with_evidence([7, 10])
            .with_uncertainty("Benefit for hemorrhagic stroke is not established."),
    )
    .unwrap();
    s
}

pub fn build_f1() -> GovernedSession {
    build_f1_session("f1", false)
}

pub fn build_f1_prime() -> GovernedSession {
    build_f1_session("f1-prime", true)
}
