use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::{Payload, TraceEvent};
use crate::protocol::{
    char_len, FrictionCueKind, ReflectionAction, UncertaintyLevel, UncertaintySpan,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentProfile {
    Credulous,
    Diligent,
}

impl AgentProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentProfile::Credulous => "credulous",
            AgentProfile::Diligent => "diligent",
        }
    }
}

/// An earlier event a scripted move refers to, resolved when the move runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventRef {
    FirstArticulation,
    LatestArticulation,
    /// The latest abstraction, Revise or Branch event.
    LatestDraft,
}

impl EventRef {
    /// Seq of the referenced event in `events`, if one exists.
    pub fn resolve(self, events: &[TraceEvent]) -> Option<u64> {
        let is_articulation = |e: &&TraceEvent| matches!(e.payload, Payload::Articulation(_));
        let found = match self {
            EventRef::FirstArticulation => events.iter().find(is_articulation),
            EventRef::LatestArticulation => events.iter().rev().find(is_articulation),
            EventRef::LatestDraft => events.iter().rev().find(|e| match &e.payload {
                Payload::Abstraction(_) => true,
                Payload::Reflection(r) => r.action.draft().is_some(),
                _ => false,
            }),
        };
        found.map(|e| e.seq)
    }
}

/// A reflection move as written in an agent script. Texts may use the
/// `{claim}` placeholder; tags name their target symbolically and default to
/// the whole target text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptedAction {
    Accept,
    Challenge {
        counter_evidence: String,
    },
    Revise {
        new_draft: String,
    },
    TagUncertainty {
        level: UncertaintyLevel,
        target: EventRef,
        #[serde(default)]
        start: Option<u64>,
        #[serde(default)]
        end: Option<u64>,
    },
    Branch {
        alternative_draft: String,
    },
    RequestCounterexample,
}

impl ScriptedAction {
    /// Bind placeholders and symbolic targets against the trace so far.
    /// `None` when a tag's target does not exist yet.
    pub fn resolve(&self, claim: &str, events: &[TraceEvent]) -> Option<ReflectionAction> {
        let fill = |text: &str| fill_claim(text, claim);
        Some(match self {
            ScriptedAction::Accept => ReflectionAction::Accept,
            ScriptedAction::Challenge { counter_evidence } => ReflectionAction::Challenge {
                counter_evidence: fill(counter_evidence),
            },
            ScriptedAction::Revise { new_draft } => ReflectionAction::Revise {
                new_draft: fill(new_draft),
            },
            ScriptedAction::Branch { alternative_draft } => ReflectionAction::Branch {
                alternative_draft: fill(alternative_draft),
            },
            ScriptedAction::RequestCounterexample => ReflectionAction::RequestCounterexample,
            ScriptedAction::TagUncertainty { level, target, start, end } => {
                let seq = target.resolve(events)?;
                let len = events
                    .get(seq as usize - 1)
                    .and_then(|e| e.payload.annotatable_text())
                    .map(char_len)
                    .unwrap_or(0);
                ReflectionAction::TagUncertainty {
                    span: UncertaintySpan::new(start.unwrap_or(0), end.unwrap_or(len), *level),
                    target_event: seq,
                }
            }
        })
    }
}

pub(crate) fn fill_claim(text: &str, claim: &str) -> String {
    text.replace("{claim}", claim)
}

/// One step of a scripted agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentMove {
    Abstraction {
        draft: String,
        #[serde(default)]
        confidence: Option<f64>,
    },
    /// Respond to a cue only if the last articulation raised it.
    OnCue {
        cue: FrictionCueKind,
        action: ScriptedAction,
    },
    Reflect {
        action: ScriptedAction,
    },
    /// `conclusion` may use `{draft}` (the active branch's current draft)
    /// and `{claim}`.
    Finalize {
        conclusion: String,
        #[serde(default)]
        uncertainty_statement: String,
        #[serde(default)]
        evidence: Vec<EventRef>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskScript {
    pub moves: Vec<AgentMove>,
    /// A second, later session on the same task, for retention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup: Option<Vec<AgentMove>>,
}

/// A deterministic scripted user: one move list per claim id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentScript {
    pub profile: AgentProfile,
    /// Overrides the run seed when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: BTreeMap<String, TaskScript>,
}

/// Replies for each task, consumed in order by that task's sessions.
pub type BackendScript = BTreeMap<String, Vec<String>>;
