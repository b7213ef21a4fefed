use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::agent::AgentProfile;
use super::harness::{Arm, HarnessOptions, SessionRecord};
use super::observables::{
    false_confirmation_rate, persistence_counts, retention_consistency, SessionSummary, TaskTrace,
};
use super::{ExperimentError, LabeledClaim};
use crate::canonical;
use crate::decimal::Fixed4;
use crate::metrics::{
    compute_session_metrics, confidence_calibration, spearman, CalibrationInput, MetricsReport,
};
use crate::protocol::Phase;

fn fixed(x: f64) -> Fixed4 {
    Fixed4::from_f64(x).expect("observables are finite")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionOutcome {
    pub claim_id: String,
    pub session_id: String,
    pub phase: Phase,
    /// Finalized with a conclusion that asserts the claim iff it is true.
    pub correct: bool,
    /// Finalized with the claim's tokens in the conclusion.
    pub confirmed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_confidence: Option<Fixed4>,
    /// RQI uses `correct` (1 or 0) as the accuracy input.
    pub metrics: MetricsReport,
}

/// Table 1 observables for one arm. Absent values serialize as null.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArmResult {
    pub arm: Arm,
    pub sessions: Vec<SessionOutcome>,
    pub false_confirmation_rate: Option<Fixed4>,
    pub calibration: Option<Fixed4>,
    pub retention_consistency: Option<Fixed4>,
    pub hallucination_persistence: Option<Fixed4>,
    pub mean_branches: Fixed4,
    pub s2_quality_correlation: Option<Fixed4>,
    pub mean_reflection_depth: Fixed4,
    pub mean_s2_engagement: Fixed4,
}

impl ArmResult {
    fn observable(&self, name: &str) -> Option<Fixed4> {
        match name {
            "false_confirmation_rate" => self.false_confirmation_rate,
            "calibration" => self.calibration,
            "retention_consistency" => self.retention_consistency,
            "hallucination_persistence" => self.hallucination_persistence,
            "mean_branches" => Some(self.mean_branches),
            "s2_quality_correlation" => self.s2_quality_correlation,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeltaRow {
    pub hypothesis: &'static str,
    pub observable: &'static str,
    pub control: Option<Fixed4>,
    pub treatment: Option<Fixed4>,
    /// `treatment - control` on the reported four-digit values.
    pub delta: Option<Fixed4>,
    pub expected: &'static str,
    pub observed: &'static str,
}

impl DeltaRow {
    /// Whether the observed direction matches the expected one.
    pub fn matches_expectation(&self) -> bool {
        self.observed == self.expected
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentReport {
    pub agent_profile: AgentProfile,
    pub seed: u64,
    pub tasks: usize,
    /// Which arm ran first for each task.
    pub first_arm: BTreeMap<String, Arm>,
    pub control: ArmResult,
    pub treatment: ArmResult,
    pub deltas: Vec<DeltaRow>,
}

impl ExperimentReport {
    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(self).expect("report holds no floats")
    }

    pub fn delta(&self, hypothesis: &str) -> Option<&DeltaRow> {
        self.deltas.iter().find(|d| d.hypothesis == hypothesis)
    }
}

const ROWS: [(&str, &str, &str, &str); 6] = [
    ("H1", "false_confirmation_rate", "plausible-but-false claims accepted", "↓"),
    ("H2", "calibration", "confidence/accuracy rank correlation", "↑"),
    ("H3", "retention_consistency", "step retention across sessions", "↑"),
    ("H4", "hallucination_persistence", "initial false claims kept", "↓"),
    ("H5", "mean_branches", "reasoning branches per task", "↑"),
    ("H6", "s2_quality_correlation", "s2 engagement vs expert quality", "↑"),
];

fn direction(delta: Option<Fixed4>) -> &'static str {
    match delta.map(|d| d.ten_thousandths().signum()) {
        None => "n/a",
        Some(-1) => "↓",
        Some(1) => "↑",
        Some(_) => "=",
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn arm_result(
    arm: Arm,
    corpus: &BTreeMap<&str, &LabeledClaim>,
    sessions: &[SessionRecord],
    options: HarnessOptions,
) -> Result<ArmResult, ExperimentError> {
    let main: Vec<&SessionRecord> = sessions.iter().filter(|s| s.arm == arm && !s.followup).collect();
    let mut outcomes = Vec::with_capacity(main.len());
    let mut summaries = Vec::with_capacity(main.len());
    let mut s2 = Vec::with_capacity(main.len());
    let mut depth = Vec::with_capacity(main.len());
    let (mut initial_false, mut kept_false) = (0, 0);
    for record in &main {
        let claim = corpus[record.claim_id.as_str()];
        let summary = SessionSummary::from_trace(&record.events);
        let correct = summary.is_correct(claim);
        let accuracy = if correct { 1.0 } else { 0.0 };
        let metrics = compute_session_metrics(&record.events, options.theta, Some(accuracy), Some(options.weights))?;
        let (initial, kept) = persistence_counts(&record.events, std::slice::from_ref(claim));
        initial_false += initial;
        kept_false += kept;
        s2.push(metrics.s2_engagement);
        depth.push(f64::from(metrics.reflection_depth));
        outcomes.push(SessionOutcome {
            claim_id: record.claim_id.clone(),
            session_id: record.session_id.clone(),
            phase: summary.phase,
            correct,
            confirmed: summary.confirms(&claim.text),
            initial_confidence: summary.initial_confidence.map(fixed),
            metrics: metrics.report(),
        });
        summaries.push((claim, summary));
    }

    let pairs: Vec<_> = summaries.iter().map(|(c, s)| (*c, s)).collect();
    let false_confirmation_rate = match false_confirmation_rate(&pairs) {
        Ok(rate) => Some(fixed(rate)),
        Err(ExperimentError::NoPlantedClaims) => None,
        Err(e) => return Err(e),
    };

    let calibration_pairs: Vec<(f64, bool)> = summaries
        .iter()
        .filter_map(|(c, s)| s.initial_confidence.map(|conf| (conf, s.is_correct(c))))
        .collect();
    let calibration = confidence_calibration(&CalibrationInput::new(calibration_pairs)).ok().map(fixed);

    let hallucination_persistence =
        (initial_false > 0).then(|| fixed(kept_false as f64 / initial_false as f64));

    let mut retention = Vec::new();
    for followup in sessions.iter().filter(|s| s.arm == arm && s.followup) {
        if let Some(first) = main.iter().find(|m| m.claim_id == followup.claim_id) {
            retention.push(retention_consistency(
                TaskTrace { task_id: &first.claim_id, events: &first.events },
                TaskTrace { task_id: &followup.claim_id, events: &followup.events },
            )?);
        }
    }
    let retention_consistency = (!retention.is_empty()).then(|| fixed(mean(retention.into_iter())));

    let labeled: Vec<(f64, f64)> = summaries
        .iter()
        .zip(&s2)
        .filter_map(|((c, _), s)| c.expert_quality.map(|q| (*s, q)))
        .collect();
    let s2_quality_correlation = if labeled.is_empty() {
        None
    } else {
        let (xs, ys): (Vec<f64>, Vec<f64>) = labeled.into_iter().unzip();
        spearman(&xs, &ys).ok().map(fixed)
    };

    Ok(ArmResult {
        arm,
        mean_branches: fixed(mean(outcomes.iter().map(|o| f64::from(o.metrics.branch_count)))),
        mean_reflection_depth: fixed(mean(depth.into_iter())),
        mean_s2_engagement: fixed(mean(s2.into_iter())),
        sessions: outcomes,
        false_confirmation_rate,
        calibration,
        retention_consistency,
        hallucination_persistence,
        s2_quality_correlation,
    })
}

pub(crate) fn build_report(
    corpus: &[LabeledClaim],
    profile: AgentProfile,
    seed: u64,
    arm_order: &[(String, Arm)],
    sessions: &[SessionRecord],
    options: HarnessOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let by_id: BTreeMap<&str, &LabeledClaim> = corpus.iter().map(|c| (c.claim_id.as_str(), c)).collect();
    let control = arm_result(Arm::Control, &by_id, sessions, options)?;
    let treatment = arm_result(Arm::Treatment, &by_id, sessions, options)?;
    let deltas = ROWS
        .iter()
        .map(|&(hypothesis, observable, _, expected)| {
            let c = control.observable(observable);
            let t = treatment.observable(observable);
            let delta = c
                .zip(t)
                .map(|(c, t)| Fixed4::from_ten_thousandths(t.ten_thousandths() - c.ten_thousandths()));
            DeltaRow {
                hypothesis,
                observable,
                control: c,
                treatment: t,
                delta,
                expected,
                observed: direction(delta),
            }
        })
        .collect();
    Ok(ExperimentReport {
        agent_profile: profile,
        seed,
        tasks: corpus.len(),
        first_arm: arm_order.iter().cloned().collect(),
        control,
        treatment,
        deltas,
    })
}

fn cell(value: Option<Fixed4>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

/// Plain-text rendering in the shape of Table 1, one row per hypothesis.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "paired run: agent={} seed={} tasks={}",
        report.agent_profile.as_str(),
        report.seed,
        report.tasks
    );
    let _ = writeln!(
        out,
        "{:<4} {:<38} {:>9} {:>9} {:>9}  {:<8} {:<8}",
        "", "observable", "control", "treatment", "delta", "expected", "observed"
    );
    for (row, (_, _, label, _)) in report.deltas.iter().zip(ROWS) {
        let _ = writeln!(
            out,
            "{:<4} {:<38} {:>9} {:>9} {:>9}  {:<8} {:<8}",
            row.hypothesis,
            label,
            cell(row.control),
            cell(row.treatment),
            cell(row.delta),
            row.expected,
            row.observed
        );
    }
    out
}
