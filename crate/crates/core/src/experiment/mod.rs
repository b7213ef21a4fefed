//! Paired control/treatment harness over labeled claim corpora.
//!
//! Each task runs once per arm with the same scripted agent and backend
//! replies: the control arm in Creative mode with friction disabled, the
//! treatment arm under the default High policy. The harness measures the
//! pipeline on scripted agents; it says nothing about human users.

mod agent;
mod harness;
mod observables;
mod report;

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use agent::{AgentMove, AgentProfile, AgentScript, BackendScript, EventRef, ScriptedAction, TaskScript};
pub use harness::{run_paired, run_paired_with, Arm, HarnessOptions, PairedRun, SessionRecord};
pub use observables::{
    contains_claim, false_confirmation_rate, hallucination_persistence, persistence_counts,
    retention_consistency, step_fingerprints, SessionSummary, TaskTrace,
};
pub use report::{render_table, ArmResult, DeltaRow, ExperimentReport, SessionOutcome};

use crate::backend::BackendError;
use crate::metrics::MetricsError;
use crate::protocol::ProtocolError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledClaim {
    pub claim_id: String,
    pub text: String,
    pub truth: bool,
    pub plausible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// External expert rating of decision quality for this task, used only
    /// for the engagement-versus-quality correlation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_quality: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("claim id {0} appears more than once")]
    DuplicateClaim(String),
    #[error("agent script has no task for claim {0}")]
    MissingTask(String),
    #[error("backend script has no replies for claim {0}")]
    MissingBackendScript(String),
    #[error("task {task}, {arm} arm, move {step}: {source}")]
    ScriptMismatch {
        task: String,
        arm: &'static str,
        step: usize,
        #[source]
        source: ProtocolError,
    },
    #[error("task {task}, {arm} arm: {source}")]
    Backend {
        task: String,
        arm: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("no plausible-but-false claims among the sessions")]
    NoPlantedClaims,
    #[error("no false claim appears in the first articulation")]
    NoInitialFalseClaims,
    #[error("sessions belong to different tasks ({0} vs {1})")]
    TaskMismatch(String, String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot read {path}: {reason}")]
    Input { path: String, reason: String },
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::EmptyCorpus => "EmptyCorpus",
            ExperimentError::DuplicateClaim(_) => "DuplicateClaim",
            ExperimentError::MissingTask(_) => "MissingTask",
            ExperimentError::MissingBackendScript(_) => "MissingBackendScript",
            ExperimentError::ScriptMismatch { .. } => "ScriptMismatch",
            ExperimentError::Backend { source, .. } => source.code(),
            ExperimentError::NoPlantedClaims => "NoPlantedClaims",
            ExperimentError::NoInitialFalseClaims => "NoInitialFalseClaims",
            ExperimentError::TaskMismatch(..) => "TaskMismatch",
            ExperimentError::Metrics(e) => e.code(),
            ExperimentError::Input { .. } => "MalformedInput",
        }
    }
}

pub(crate) fn validate_corpus(corpus: &[LabeledClaim]) -> Result<(), ExperimentError> {
    if corpus.is_empty() {
        return Err(ExperimentError::EmptyCorpus);
    }
    let mut seen = BTreeSet::new();
    for claim in corpus {
        if !seen.insert(claim.claim_id.as_str()) {
            return Err(ExperimentError::DuplicateClaim(claim.claim_id.clone()));
        }
    }
    Ok(())
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let input = |reason: String| ExperimentError::Input {
        path: path.display().to_string(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| input(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| input(e.to_string()))
}

pub fn load_corpus(path: &Path) -> Result<Vec<LabeledClaim>, ExperimentError> {
    let corpus: Vec<LabeledClaim> = load_json(path)?;
    validate_corpus(&corpus)?;
    Ok(corpus)
}

pub fn load_agent(path: &Path) -> Result<AgentScript, ExperimentError> {
    load_json(path)
}

pub fn load_backend_script(path: &Path) -> Result<BackendScript, ExperimentError> {
    load_json(path)
}
