use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{FrictionCueKind, ReasoningMode};

/// When a scheduled friction cue fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionTrigger {
    /// After every articulation while the falsification gate is unmet.
    ArticulationUntilFalsificationMet,
    /// After every articulation while the uncertainty-tag gate is unmet.
    ArticulationUntilUncertaintyMet,
    /// After the first articulation that answers each human draft.
    FirstArticulationOfIteration,
    /// At the first finalization attempt of the session.
    FirstFinalizationAttempt,
    /// At a finalization attempt when no reflection turn has been taken yet; once.
    FinalizationWithoutReflection,
}

impl FrictionTrigger {
    pub fn at_finalization(self) -> bool {
        matches!(
            self,
            FrictionTrigger::FirstFinalizationAttempt | FrictionTrigger::FinalizationWithoutReflection
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledCue {
    pub trigger: FrictionTrigger,
    pub cue: FrictionCueKind,
}

impl ScheduledCue {
    pub const fn new(trigger: FrictionTrigger, cue: FrictionCueKind) -> Self {
        ScheduledCue { trigger, cue }
    }
}

/// Finalization gates and friction schedule for a session.
///
/// There is deliberately no switch for trace logging: every mode records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModePolicy {
    pub min_reflection_depth: u32,
    pub min_falsification_events: u32,
    pub min_uncertainty_tags: u32,
    pub require_rationale: bool,
    pub require_human_accept: bool,
    pub friction_schedule: Vec<ScheduledCue>,
}

impl ModePolicy {
    pub fn default_for(mode: ReasoningMode) -> Self {
        use FrictionCueKind::*;
        use FrictionTrigger::*;
        match mode {
            ReasoningMode::Creative => ModePolicy {
                min_reflection_depth: 0,
                min_falsification_events: 0,
                min_uncertainty_tags: 0,
                require_rationale: false,
                require_human_accept: false,
                friction_schedule: vec![],
            },
            ReasoningMode::Low => ModePolicy {
                min_reflection_depth: 0,
                min_falsification_events: 0,
                min_uncertainty_tags: 0,
                require_rationale: true,
                require_human_accept: true,
                friction_schedule: vec![ScheduledCue::new(FinalizationWithoutReflection, Pause)],
            },
            ReasoningMode::Medium => ModePolicy {
                min_reflection_depth: 1,
                min_falsification_events: 0,
                min_uncertainty_tags: 0,
                require_rationale: true,
                require_human_accept: true,
                friction_schedule: vec![ScheduledCue::new(
                    FirstArticulationOfIteration,
                    CounterexampleRequest,
                )],
            },
            ReasoningMode::High => ModePolicy {
                min_reflection_depth: 2,
                min_falsification_events: 1,
                min_uncertainty_tags: 1,
                require_rationale: true,
                require_human_accept: true,
                friction_schedule: vec![
                    ScheduledCue::new(ArticulationUntilFalsificationMet, CounterexampleRequest),
                    ScheduledCue::new(ArticulationUntilUncertaintyMet, UncertaintyQuery),
                    ScheduledCue::new(FirstFinalizationAttempt, JustificationRequest),
                ],
            },
        }
    }

    /// Same gates, no friction cues at all.
    pub fn without_friction(mut self) -> Self {
        self.friction_schedule.clear();
        self
    }
}

/// Unvalidated policy as supplied by a caller or a config file.
///
/// Counts are signed so that negative values can be reported as an invalid
/// policy rather than a parse failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverride {
    pub min_reflection_depth: i64,
    pub min_falsification_events: i64,
    pub min_uncertainty_tags: i64,
    pub require_rationale: bool,
    pub require_human_accept: bool,
    #[serde(default)]
    pub friction_schedule: Vec<ScheduledCue>,
}

impl From<&ModePolicy> for PolicyOverride {
    fn from(p: &ModePolicy) -> Self {
        PolicyOverride {
            min_reflection_depth: p.min_reflection_depth.into(),
            min_falsification_events: p.min_falsification_events.into(),
            min_uncertainty_tags: p.min_uncertainty_tags.into(),
            require_rationale: p.require_rationale,
            require_human_accept: p.require_human_accept,
            friction_schedule: p.friction_schedule.clone(),
        }
    }
}

impl PolicyOverride {
    pub fn validate(&self) -> Result<ModePolicy, String> {
        let count = |name: &str, v: i64| -> Result<u32, String> {
            u32::try_from(v).map_err(|_| format!("{name} must be a nonnegative integer, got {v}"))
        };
        Ok(ModePolicy {
            min_reflection_depth: count("min_reflection_depth", self.min_reflection_depth)?,
            min_falsification_events: count("min_falsification_events", self.min_falsification_events)?,
            min_uncertainty_tags: count("min_uncertainty_tags", self.min_uncertainty_tags)?,
            require_rationale: self.require_rationale,
            require_human_accept: self.require_human_accept,
            friction_schedule: self.friction_schedule.clone(),
        })
    }
}

/// A finalization requirement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    ReflectionDepth,
    FalsificationEvents,
    UncertaintyTags,
    Rationale,
    HumanAccept,
}

impl Gate {
    pub const ALL: [Gate; 5] = [
        Gate::ReflectionDepth,
        Gate::FalsificationEvents,
        Gate::UncertaintyTags,
        Gate::Rationale,
        Gate::HumanAccept,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Gate::ReflectionDepth => "reflection_depth",
            Gate::FalsificationEvents => "falsification_events",
            Gate::UncertaintyTags => "uncertainty_tags",
            Gate::Rationale => "rationale",
            Gate::HumanAccept => "human_accept",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
