use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{fill_claim, AgentMove, AgentScript, BackendScript};
use super::report::{build_report, ExperimentReport};
use super::{validate_corpus, ExperimentError, LabeledClaim};
use crate::backend::{Backend, GenerationRequest, ScriptedBackend};
use crate::clock::{Clock, ManualClock};
use crate::ledger::TraceEvent;
use crate::metrics::{RqiWeights, Theta};
use crate::protocol::{
    AbstractionInput, FrictionCueKind, GovernedSession, ModePolicy, Phase, PolicyOverride,
    ProtocolError, RationaleSummary, ReasoningMode, SessionConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treatment => "treatment",
        }
    }

    /// The only difference between the arms.
    pub fn session_config(self, theta: Theta) -> SessionConfig {
        match self {
            Arm::Control => {
                let policy = ModePolicy::default_for(ReasoningMode::Creative).without_friction();
                SessionConfig::new(ReasoningMode::Creative)
                    .with_policy(PolicyOverride::from(&policy))
                    .with_theta(theta)
            }
            Arm::Treatment => SessionConfig::new(ReasoningMode::High).with_theta(theta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarnessOptions {
    pub theta: Theta,
    pub weights: RqiWeights,
    /// Timestamp of the first event of a run.
    pub start_ms: u64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            theta: Theta::DEFAULT,
            weights: RqiWeights::default(),
            start_ms: 1_700_000_000_000,
        }
    }
}

/// One session the harness ran, with its full trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub arm: Arm,
    pub claim_id: String,
    pub followup: bool,
    pub session_id: String,
    pub events: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedRun {
    pub report: ExperimentReport,
    /// Sessions in execution order.
    pub sessions: Vec<SessionRecord>,
}

pub fn run_paired(
    corpus: &[LabeledClaim],
    agent: &AgentScript,
    backend_script: &BackendScript,
    seed: u64,
) -> Result<PairedRun, ExperimentError> {
    run_paired_with(corpus, agent, backend_script, seed, HarnessOptions::default())
}

/// Run every corpus task in both arms, in claim-id order. The seed picks
/// which arm goes first for each task and salts the session ids; the agent's
/// own seed, when set, takes precedence.
pub fn run_paired_with(
    corpus: &[LabeledClaim],
    agent: &AgentScript,
    backend_script: &BackendScript,
    seed: u64,
    options: HarnessOptions,
) -> Result<PairedRun, ExperimentError> {
    validate_corpus(corpus)?;
    let seed = agent.seed.unwrap_or(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(options.start_ms, 1_000));

    let mut claims: Vec<&LabeledClaim> = corpus.iter().collect();
    claims.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));

    let mut sessions = Vec::new();
    let mut arm_order = Vec::new();
    for claim in claims {
        let task = agent
            .tasks
            .get(&claim.claim_id)
            .ok_or_else(|| ExperimentError::MissingTask(claim.claim_id.clone()))?;
        let replies = backend_script
            .get(&claim.claim_id)
            .ok_or_else(|| ExperimentError::MissingBackendScript(claim.claim_id.clone()))?;
        let backend = ScriptedBackend::new(replies.clone());
        let arms = if rng.random_bool(0.5) {
            [Arm::Treatment, Arm::Control]
        } else {
            [Arm::Control, Arm::Treatment]
        };
        arm_order.push((claim.claim_id.clone(), arms[0]));
        let mut plan: Vec<(Arm, bool, &[AgentMove])> =
            arms.iter().map(|&arm| (arm, false, task.moves.as_slice())).collect();
        if let Some(followup) = &task.followup {
            plan.extend(arms.iter().map(|&arm| (arm, true, followup.as_slice())));
        }
        for (arm, followup, moves) in plan {
            let session_id = format!(
                "{}-{}{}-{:08x}",
                arm.as_str(),
                claim.claim_id,
                if followup { "-followup" } else { "" },
                rng.random::<u32>()
            );
            let events = run_session(&session_id, arm, claim, moves, &backend, clock.clone(), options.theta)?;
            sessions.push(SessionRecord {
                arm,
                claim_id: claim.claim_id.clone(),
                followup,
                session_id,
                events,
            });
        }
    }
    let report = build_report(corpus, agent.profile, seed, &arm_order, &sessions, options)?;
    Ok(PairedRun { report, sessions })
}

struct Driver<'a> {
    session: GovernedSession,
    claim: &'a LabeledClaim,
    arm: Arm,
    backend: &'a ScriptedBackend,
    /// Cues raised by the latest articulation and not yet answered.
    pending: Vec<FrictionCueKind>,
}

impl Driver<'_> {
    fn mismatch(&self, step: usize, source: ProtocolError) -> ExperimentError {
        ExperimentError::ScriptMismatch {
            task: self.claim.claim_id.clone(),
            arm: self.arm.as_str(),
            step,
            source,
        }
    }

    fn articulate(&mut self, step: usize) -> Result<(), ExperimentError> {
        let state = self.session.session();
        let request = GenerationRequest::from_trace(self.session.events(), &state.active_branch, true);
        let articulation = self.backend.generate(&request).map_err(|source| ExperimentError::Backend {
            task: self.claim.claim_id.clone(),
            arm: self.arm.as_str(),
            source,
        })?;
        let cues = self
            .session
            .record_articulation(articulation)
            .map_err(|e| self.mismatch(step, e))?;
        self.pending = cues.into_iter().map(|c| c.cue).collect();
        Ok(())
    }

    fn reflect(&mut self, step: usize, action: &super::ScriptedAction) -> Result<(), ExperimentError> {
        let action = action
            .resolve(&self.claim.text, self.session.events())
            .ok_or_else(|| self.mismatch(step, ProtocolError::UnknownTarget(0)))?;
        self.session.submit_reflection(action).map(drop).map_err(|e| self.mismatch(step, e))?;
        if self.session.session().phase == Phase::Articulation {
            self.articulate(step)?;
        }
        Ok(())
    }

    fn current_draft(&self) -> String {
        let state = self.session.session();
        GenerationRequest::from_trace(self.session.events(), &state.active_branch, false).current_draft
    }

    /// Returns false once the session has closed.
    fn step(&mut self, step: usize, mv: &AgentMove) -> Result<bool, ExperimentError> {
        if self.session.session().phase.is_terminal() {
            let phase = self.session.session().phase;
            return Err(self.mismatch(step, ProtocolError::WrongPhase { operation: "scripted move", phase }));
        }
        match mv {
            AgentMove::Abstraction { draft, confidence } => {
                let mut input = AbstractionInput::new(fill_claim(draft, &self.claim.text));
                input.stated_confidence = *confidence;
                self.session.submit_abstraction(input).map(drop).map_err(|e| self.mismatch(step, e))?;
                self.articulate(step)?;
            }
            AgentMove::OnCue { cue, action } => {
                if let Some(i) = self.pending.iter().position(|c| c == cue) {
                    self.pending.remove(i);
                    self.reflect(step, action)?;
                }
            }
            AgentMove::Reflect { action } => self.reflect(step, action)?,
            AgentMove::Finalize { conclusion, uncertainty_statement, evidence } => {
                let conclusion = fill_claim(conclusion, &self.claim.text).replace("{draft}", &self.current_draft());
                let refs: Vec<u64> = evidence.iter().filter_map(|r| r.resolve(self.session.events())).collect();
                let rationale = RationaleSummary::new(conclusion)
                    .with_uncertainty(fill_claim(uncertainty_statement, &self.claim.text))
                    .with_evidence(refs);
                match self.session.request_finalization(rationale) {
                    Ok(_) => return Ok(false),
                    Err(ProtocolError::PolicyViolation { unmet, .. }) => {
                        let gates: Vec<&str> = unmet.iter().map(|g| g.as_str()).collect();
                        self.session
                            .abort(format!("finalization refused: {}", gates.join(", ")))
                            .map(drop)
                            .map_err(|e| self.mismatch(step, e))?;
                        return Ok(false);
                    }
                    Err(e) => return Err(self.mismatch(step, e)),
                }
            }
        }
        Ok(true)
    }
}

fn run_session(
    session_id: &str,
    arm: Arm,
    claim: &LabeledClaim,
    moves: &[AgentMove],
    backend: &ScriptedBackend,
    clock: Arc<dyn Clock>,
    theta: Theta,
) -> Result<Vec<TraceEvent>, ExperimentError> {
    let session = GovernedSession::create(session_id, arm.session_config(theta), clock, None)
        .map_err(|source| ExperimentError::ScriptMismatch {
            task: claim.claim_id.clone(),
            arm: arm.as_str(),
            step: 0,
            source,
        })?;
    let mut driver = Driver {
        session,
        claim,
        arm,
        backend,
        pending: Vec::new(),
    };
    for (i, mv) in moves.iter().enumerate() {
        if !driver.step(i + 1, mv)? {
            break;
        }
    }
    if !driver.session.session().phase.is_terminal() {
        driver
            .session
            .abort("script ended before finalization")
            .map(drop)
            .map_err(|e| driver.mismatch(moves.len(), e))?;
    }
    Ok(driver.session.events().to_vec())
}
