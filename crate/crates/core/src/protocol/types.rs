use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decimal::Fixed4;

/// Depth of reasoning a session is governed by; fixed at creation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningMode {
    Creative,
    Low,
    Medium,
    High,
}

impl ReasoningMode {
    pub const ALL: [ReasoningMode; 4] = [
        ReasoningMode::Creative,
        ReasoningMode::Low,
        ReasoningMode::Medium,
        ReasoningMode::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningMode::Creative => "creative",
            ReasoningMode::Low => "low",
            ReasoningMode::Medium => "medium",
            ReasoningMode::High => "high",
        }
    }

    /// Medium and High rationales must state residual uncertainty.
    pub fn requires_uncertainty_statement(self) -> bool {
        matches!(self, ReasoningMode::Medium | ReasoningMode::High)
    }
}

impl fmt::Display for ReasoningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReasoningMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown reasoning mode `{s}` (expected creative, low, medium or high)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Abstraction,
    Articulation,
    Reflection,
    Finalized,
    Aborted,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Abstraction,
        Phase::Articulation,
        Phase::Reflection,
        Phase::Finalized,
        Phase::Aborted,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Finalized | Phase::Aborted)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Abstraction => "abstraction",
            Phase::Articulation => "articulation",
            Phase::Reflection => "reflection",
            Phase::Finalized => "finalized",
            Phase::Aborted => "aborted",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchId(pub String);

impl BranchId {
    pub fn root() -> Self {
        BranchId("root".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyLevel {
    Low,
    Medium,
    High,
}

impl FromStr for UncertaintyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(UncertaintyLevel::Low),
            "medium" => Ok(UncertaintyLevel::Medium),
            "high" => Ok(UncertaintyLevel::High),
            _ => Err(format!("unknown uncertainty level `{s}`")),
        }
    }
}

impl fmt::Display for UncertaintyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UncertaintyLevel::Low => "low",
            UncertaintyLevel::Medium => "medium",
            UncertaintyLevel::High => "high",
        })
    }
}

/// Half-open character range `[start, end)` over an annotated text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpan {
    pub start: u64,
    pub end: u64,
    pub level: UncertaintyLevel,
}

impl UncertaintySpan {
    pub fn new(start: u64, end: u64, level: UncertaintyLevel) -> Self {
        UncertaintySpan { start, end, level }
    }

    /// `0 <= start < end <= text_len` (lengths counted in chars).
    pub fn fits(&self, text_len: u64) -> bool {
        self.start < self.end && self.end <= text_len
    }
}

pub fn char_len(text: &str) -> u64 {
    text.chars().count() as u64
}

/// The human's draft at the start of the loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractionInput {
    pub draft_text: String,
    #[serde(default)]
    pub stated_confidence: Option<f64>,
    #[serde(default)]
    pub parent_branch: Option<BranchId>,
}

impl AbstractionInput {
    pub fn new(draft_text: impl Into<String>) -> Self {
        AbstractionInput {
            draft_text: draft_text.into(),
            stated_confidence: None,
            parent_branch: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.stated_confidence = Some(confidence);
        self
    }
}

/// A model response with optional uncertainty cues.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Articulation {
    pub output_text: String,
    #[serde(default)]
    pub uncertainty_cues: Vec<UncertaintySpan>,
    pub backend_id: String,
    #[serde(default)]
    pub latency_ms: u64,
}

impl Articulation {
    pub fn plain(output_text: impl Into<String>, backend_id: impl Into<String>) -> Self {
        Articulation {
            output_text: output_text.into(),
            uncertainty_cues: Vec::new(),
            backend_id: backend_id.into(),
            latency_ms: 0,
        }
    }
}

/// The human's move in the reflection phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReflectionAction {
    Accept,
    Challenge { counter_evidence: String },
    Revise { new_draft: String },
    TagUncertainty { span: UncertaintySpan, target_event: u64 },
    Branch { alternative_draft: String },
    RequestCounterexample,
}

impl ReflectionAction {
    pub fn name(&self) -> &'static str {
        match self {
            ReflectionAction::Accept => "accept",
            ReflectionAction::Challenge { .. } => "challenge",
            ReflectionAction::Revise { .. } => "revise",
            ReflectionAction::TagUncertainty { .. } => "tag_uncertainty",
            ReflectionAction::Branch { .. } => "branch",
            ReflectionAction::RequestCounterexample => "request_counterexample",
        }
    }

    /// Text the action introduces as a new draft, if any.
    pub fn draft(&self) -> Option<&str> {
        match self {
            ReflectionAction::Revise { new_draft } => Some(new_draft),
            ReflectionAction::Branch { alternative_draft } => Some(alternative_draft),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionCueKind {
    Pause,
    CounterexampleRequest,
    UncertaintyQuery,
    JustificationRequest,
}

impl FrictionCueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrictionCueKind::Pause => "pause",
            FrictionCueKind::CounterexampleRequest => "counterexample_request",
            FrictionCueKind::UncertaintyQuery => "uncertainty_query",
            FrictionCueKind::JustificationRequest => "justification_request",
        }
    }

    /// Fixed prompt text for the cue.
    pub fn template(self) -> &'static str {
        match self {
            FrictionCueKind::Pause => {
                "Pause before finalizing: restate the conclusion in your own words and check it against what you already know."
            }
            FrictionCueKind::CounterexampleRequest => {
                "Name one concrete case in which this answer would be wrong, or challenge it with counter-evidence."
            }
            FrictionCueKind::UncertaintyQuery => {
                "Which part of this answer are you least sure about? Tag it with an uncertainty level."
            }
            FrictionCueKind::JustificationRequest => {
                "State the evidence that grounds your conclusion before it is finalized."
            }
        }
    }
}

impl fmt::Display for FrictionCueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrictionCueKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            FrictionCueKind::Pause,
            FrictionCueKind::CounterexampleRequest,
            FrictionCueKind::UncertaintyQuery,
            FrictionCueKind::JustificationRequest,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown friction cue `{s}`"))
    }
}

/// A system-issued prompt that interrupts fluent acceptance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionCue {
    pub cue: FrictionCueKind,
    pub text: String,
    pub iteration: u32,
}

impl FrictionCue {
    pub fn new(cue: FrictionCueKind, iteration: u32) -> Self {
        FrictionCue {
            cue,
            text: cue.template().to_string(),
            iteration,
        }
    }
}

/// The record that closes a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationaleSummary {
    pub conclusion: String,
    #[serde(default)]
    pub evidence_refs: Vec<u64>,
    #[serde(default)]
    pub uncertainty_statement: String,
}

impl RationaleSummary {
    pub fn new(conclusion: impl Into<String>) -> Self {
        RationaleSummary {
            conclusion: conclusion.into(),
            evidence_refs: Vec::new(),
            uncertainty_statement: String::new(),
        }
    }

    pub fn with_evidence(mut self, refs: impl IntoIterator<Item = u64>) -> Self {
        self.evidence_refs = refs.into_iter().collect();
        self
    }

    pub fn with_uncertainty(mut self, statement: impl Into<String>) -> Self {
        self.uncertainty_statement = statement.into();
        self
    }
}

/// Confidence as recorded in the trace.
pub type Confidence = Fixed4;
