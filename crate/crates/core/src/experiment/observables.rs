use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::{ExperimentError, LabeledClaim};
use crate::ledger::{Actor, Payload, TraceEvent};
use crate::metrics::tokenize;
use crate::protocol::{Phase, ReflectionAction};

/// Whether every token of `claim` occurs in `text`.
pub fn contains_claim(text: &str, claim: &str) -> bool {
    let have: BTreeSet<String> = tokenize(text).into_iter().collect();
    tokenize(claim).iter().all(|t| have.contains(t))
}

/// A finished session reduced to what the Table 1 observables need.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionSummary {
    pub phase: Phase,
    /// Rationale conclusion, when the session finalized.
    pub conclusion: Option<String>,
    pub first_articulation: Option<String>,
    /// The active branch's latest draft if it stood accepted at the end.
    pub accepted_draft: Option<String>,
    pub initial_confidence: Option<f64>,
}

impl SessionSummary {
    pub fn from_trace(events: &[TraceEvent]) -> Self {
        let mut summary = SessionSummary {
            phase: Phase::Abstraction,
            conclusion: None,
            first_articulation: None,
            accepted_draft: None,
            initial_confidence: None,
        };
        let mut latest_draft: Option<String> = None;
        let mut accepted = false;
        for event in events {
            match &event.payload {
                Payload::Abstraction(a) => {
                    summary.initial_confidence = a.stated_confidence.map(|c| c.to_f64());
                    latest_draft = Some(a.draft_text.clone());
                    summary.phase = Phase::Articulation;
                }
                Payload::Articulation(a) => {
                    if summary.first_articulation.is_none() {
                        summary.first_articulation = Some(a.output_text.clone());
                    }
                    summary.phase = Phase::Reflection;
                }
                Payload::Reflection(r) => match &r.action {
                    ReflectionAction::Accept => accepted = true,
                    ReflectionAction::TagUncertainty { .. } => {}
                    action => {
                        accepted = false;
                        if let Some(draft) = action.draft() {
                            latest_draft = Some(draft.to_string());
                        }
                        summary.phase = Phase::Articulation;
                    }
                },
                Payload::Rationale(r) => {
                    summary.conclusion = Some(r.conclusion.clone());
                    summary.phase = Phase::Finalized;
                }
                Payload::Abort(_) => {
                    accepted = false;
                    summary.phase = Phase::Aborted;
                }
                Payload::SessionHeader(_) | Payload::FrictionCue(_) => {}
            }
        }
        if accepted {
            summary.accepted_draft = latest_draft;
        }
        summary
    }

    /// The session finalized with the claim's tokens in its conclusion.
    pub fn confirms(&self, claim: &str) -> bool {
        self.phase == Phase::Finalized
            && self.conclusion.as_deref().is_some_and(|c| contains_claim(c, claim))
    }

    /// Finalized, and the conclusion asserts the claim exactly when it is true.
    pub fn is_correct(&self, claim: &LabeledClaim) -> bool {
        self.phase == Phase::Finalized && self.confirms(&claim.text) == claim.truth
    }

    /// The text the session ended on: its conclusion, else an accepted draft.
    pub fn final_text(&self) -> Option<&str> {
        self.conclusion.as_deref().or(self.accepted_draft.as_deref())
    }
}

fn is_planted(claim: &LabeledClaim) -> bool {
    claim.plausible && !claim.truth
}

/// Fraction of plausible-but-false claims whose session finalized
/// confirming them.
pub fn false_confirmation_rate(
    sessions: &[(&LabeledClaim, &SessionSummary)],
) -> Result<f64, ExperimentError> {
    let planted: Vec<_> = sessions.iter().filter(|(c, _)| is_planted(c)).collect();
    if planted.is_empty() {
        return Err(ExperimentError::NoPlantedClaims);
    }
    let confirmed = planted.iter().filter(|(c, s)| s.confirms(&c.text)).count();
    Ok(confirmed as f64 / planted.len() as f64)
}

/// Counts `(initially present, still present)` for false claims in one trace.
pub fn persistence_counts(events: &[TraceEvent], claims: &[LabeledClaim]) -> (usize, usize) {
    let summary = SessionSummary::from_trace(events);
    let Some(first) = summary.first_articulation.as_deref() else {
        return (0, 0);
    };
    let initial: Vec<_> = claims
        .iter()
        .filter(|c| !c.truth && contains_claim(first, &c.text))
        .collect();
    let kept = initial
        .iter()
        .filter(|c| summary.final_text().is_some_and(|t| contains_claim(t, &c.text)))
        .count();
    (initial.len(), kept)
}

/// Fraction of false claims present in the first articulation that survive
/// into the final accepted draft or conclusion.
pub fn hallucination_persistence(
    events: &[TraceEvent],
    claims: &[LabeledClaim],
) -> Result<f64, ExperimentError> {
    match persistence_counts(events, claims) {
        (0, _) => Err(ExperimentError::NoInitialFalseClaims),
        (initial, kept) => Ok(kept as f64 / initial as f64),
    }
}

/// Text a human step contributes to its fingerprint: the move name followed
/// by its free text.
fn step_text(event: &TraceEvent) -> Option<String> {
    if event.actor != Actor::Human {
        return None;
    }
    match &event.payload {
        Payload::Abstraction(a) => Some(format!("abstraction {}", a.draft_text)),
        Payload::Reflection(r) => Some(match &r.action {
            ReflectionAction::Challenge { counter_evidence } => format!("challenge {counter_evidence}"),
            ReflectionAction::TagUncertainty { span, .. } => format!("tag {}", span.level),
            action => match action.draft() {
                Some(d) => format!("{} {d}", action.name()),
                None => action.name().to_string(),
            },
        }),
        _ => None,
    }
}

/// SHA-256 over the sorted, deduplicated tokens of each human step.
pub fn step_fingerprints(events: &[TraceEvent]) -> BTreeSet<String> {
    events
        .iter()
        .filter_map(step_text)
        .map(|text| {
            let tokens: BTreeSet<String> = tokenize(&text).into_iter().collect();
            let joined = tokens.into_iter().collect::<Vec<_>>().join(" ");
            hex::encode(Sha256::digest(joined.as_bytes()))
        })
        .collect()
}

/// A session trace labeled with the task it ran.
#[derive(Clone, Copy, Debug)]
pub struct TaskTrace<'a> {
    pub task_id: &'a str,
    pub events: &'a [TraceEvent],
}

/// Jaccard similarity of two same-task sessions' step fingerprints.
pub fn retention_consistency(a: TaskTrace<'_>, b: TaskTrace<'_>) -> Result<f64, ExperimentError> {
    if a.task_id != b.task_id {
        return Err(ExperimentError::TaskMismatch(a.task_id.to_string(), b.task_id.to_string()));
    }
    let fa = step_fingerprints(a.events);
    let fb = step_fingerprints(b.events);
    let union = fa.union(&fb).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(fa.intersection(&fb).count() as f64 / union as f64)
}
