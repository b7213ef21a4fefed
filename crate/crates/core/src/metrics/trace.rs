use std::collections::{BTreeSet, HashMap};

use super::text::{tokenize, RevisionDistance};
use super::{MetricsError, Theta};
use crate::ledger::{Payload, TraceEvent};
use crate::protocol::{BranchId, FrictionCueKind, ReflectionAction};

/// A Revise move and how far it moved the draft on its branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Revision {
    pub seq: u64,
    pub branch: BranchId,
    pub distance: RevisionDistance,
}

/// Counts gathered from one pass over a trace. Threshold-dependent figures
/// are derived on demand so one tally serves any `theta`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceTally {
    /// Challenge moves with nonempty counter-evidence.
    pub challenges: u32,
    pub uncertainty_tags: u32,
    pub accepts: u32,
    pub branch_actions: u32,
    pub counterexample_requests: u32,
    pub revisions: Vec<Revision>,
    /// `(seq, branch)` of every articulation, in trace order.
    pub articulations: Vec<(u64, BranchId)>,
    /// Uncertainty spans attached to model articulations.
    pub articulation_spans: u32,
    pub cues: Vec<(u64, FrictionCueKind)>,
    pub rationale_present: bool,
}

impl TraceTally {
    pub fn from_events(events: &[TraceEvent]) -> Self {
        let mut tally = TraceTally::default();
        let mut drafts: HashMap<BranchId, Vec<String>> = HashMap::new();
        for event in events {
            match &event.payload {
                Payload::Abstraction(a) => {
                    drafts.insert(a.branch.clone(), tokenize(&a.draft_text));
                }
                Payload::Articulation(a) => {
                    tally.articulations.push((event.seq, a.branch.clone()));
                    tally.articulation_spans += a.uncertainty_cues.len() as u32;
                }
                Payload::FrictionCue(c) => tally.cues.push((event.seq, c.cue)),
                Payload::Rationale(_) => tally.rationale_present = true,
                Payload::Reflection(r) => match &r.action {
                    ReflectionAction::Accept => tally.accepts += 1,
                    ReflectionAction::Challenge { counter_evidence } => {
                        if !counter_evidence.trim().is_empty() {
                            tally.challenges += 1;
                        }
                    }
                    ReflectionAction::TagUncertainty { .. } => tally.uncertainty_tags += 1,
                    ReflectionAction::RequestCounterexample => tally.counterexample_requests += 1,
                    ReflectionAction::Revise { new_draft } => {
                        let new = tokenize(new_draft);
                        let previous = drafts.get(&r.branch).map(Vec::as_slice).unwrap_or(&[]);
                        tally.revisions.push(Revision {
                            seq: event.seq,
                            branch: r.branch.clone(),
                            distance: RevisionDistance::between(previous, &new),
                        });
                        drafts.insert(r.branch.clone(), new);
                    }
                    ReflectionAction::Branch { alternative_draft } => {
                        tally.branch_actions += 1;
                        if let Some(new_branch) = &r.new_branch {
                            drafts.insert(new_branch.clone(), tokenize(alternative_draft));
                        }
                    }
                },
                Payload::SessionHeader(_) | Payload::Abort(_) => {}
            }
        }
        tally
    }

    /// Human reflection turns other than a bare Accept.
    pub fn reflection_depth(&self) -> u32 {
        self.challenges
            + self.uncertainty_tags
            + self.branch_actions
            + self.counterexample_requests
            + self.revisions.len() as u32
    }

    pub fn qualifying_revisions(&self, theta: Theta) -> u32 {
        self.revisions.iter().filter(|r| r.distance.meets(theta.get())).count() as u32
    }

    pub fn falsification_count(&self, theta: Theta) -> u32 {
        self.challenges + self.qualifying_revisions(theta)
    }

    /// Share of articulations whose first later same-branch Revise moved the
    /// draft by at least `theta`.
    pub fn correction_ratio(&self, theta: Theta) -> Result<f64, MetricsError> {
        if self.articulations.is_empty() {
            return Err(MetricsError::NoArticulations);
        }
        let corrected = self
            .articulations
            .iter()
            .filter(|(seq, branch)| {
                self.revisions
                    .iter()
                    .find(|r| r.seq > *seq && &r.branch == branch)
                    .is_some_and(|r| r.distance.meets(theta.get()))
            })
            .count();
        Ok(corrected as f64 / self.articulations.len() as f64)
    }

    /// Distinct branches that received at least one articulation.
    pub fn branch_count(&self) -> u32 {
        self.articulations
            .iter()
            .map(|(_, b)| b)
            .collect::<BTreeSet<_>>()
            .len() as u32
    }

    /// Raw engagement tally before saturation.
    pub fn engagement(&self, theta: Theta) -> u32 {
        2 * self.challenges
            + self.uncertainty_tags
            + self.qualifying_revisions(theta)
            + self.branch_count().saturating_sub(1)
    }

    pub fn s2_engagement(&self, theta: Theta) -> f64 {
        engagement_score(self.engagement(theta))
    }

    pub fn revision_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.revisions.iter().map(|r| r.distance.value())
    }
}

/// `E / (E + 4)`.
pub fn engagement_score(engagement: u32) -> f64 {
    let e = f64::from(engagement);
    e / (e + 4.0)
}

pub fn reflection_depth(events: &[TraceEvent]) -> u32 {
    TraceTally::from_events(events).reflection_depth()
}

pub fn correction_ratio(events: &[TraceEvent], theta: Theta) -> Result<f64, MetricsError> {
    TraceTally::from_events(events).correction_ratio(theta)
}

pub fn falsification_count(events: &[TraceEvent], theta: Theta) -> u32 {
    TraceTally::from_events(events).falsification_count(theta)
}

pub fn branch_count(events: &[TraceEvent]) -> u32 {
    TraceTally::from_events(events).branch_count()
}

pub fn s2_engagement(events: &[TraceEvent], theta: Theta) -> f64 {
    TraceTally::from_events(events).s2_engagement(theta)
}
