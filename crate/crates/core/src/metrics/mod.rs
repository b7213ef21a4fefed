//! Epistemic telemetry computed from a reasoning trace.
//!
//! All functions are pure over immutable events; wall-clock timestamps never
//! influence a value.

mod calibration;
mod text;
mod trace;

use serde::{Deserialize, Serialize};

pub use calibration::{average_ranks, confidence_calibration, spearman, CalibrationInput};
pub use text::{edit_distance, semantic_revision_distance, tokenize, RevisionDistance};
pub use trace::{
    branch_count, correction_ratio, engagement_score, falsification_count, reflection_depth,
    s2_engagement, Revision, TraceTally,
};

use crate::canonical;
use crate::decimal::Fixed4;
use crate::ledger::TraceEvent;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("trace contains no articulations")]
    NoArticulations,
    #[error("RQI weights must be nonnegative and sum to 1: {0}")]
    BadWeights(String),
    #[error("accuracy {0} is outside [0, 1]")]
    BadAccuracy(f64),
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("need at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("rank correlation undefined: one side has zero variance")]
    ZeroVariance,
    #[error("confidence {0} is outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("paired inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite input")]
    NotFinite,
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::NoArticulations => "NoArticulations",
            MetricsError::BadWeights(_) => "BadWeights",
            MetricsError::BadAccuracy(_) => "BadAccuracy",
            MetricsError::BadThreshold(_) => "BadThreshold",
            MetricsError::TooFewPairs(_) => "TooFewPairs",
            MetricsError::ZeroVariance => "ZeroVariance",
            MetricsError::InvalidConfidence(_) => "InvalidConfidence",
            MetricsError::LengthMismatch(..) => "LengthMismatch",
            MetricsError::NotFinite => "NotFinite",
        }
    }
}

/// Minimum normalized revision distance for a Revise to count as a correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(Fixed4);

impl Theta {
    pub const DEFAULT: Theta = Theta(Fixed4::from_ten_thousandths(2000));

    pub fn new(value: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::BadThreshold(value));
        }
        Fixed4::from_f64(value).map(Theta).map_err(|_| MetricsError::BadThreshold(value))
    }

    pub fn from_fixed(value: Fixed4) -> Result<Self, MetricsError> {
        if value.in_unit_interval() {
            Ok(Theta(value))
        } else {
            Err(MetricsError::BadThreshold(value.to_f64()))
        }
    }

    pub fn get(self) -> Fixed4 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0.to_f64()
    }
}

impl Default for Theta {
    fn default() -> Self {
        Theta::DEFAULT
    }
}

/// Weights over (depth, correction ratio, accuracy) on the 3-simplex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RqiWeights([f64; 3]);

impl RqiWeights {
    pub fn new(weights: [f64; 3]) -> Result<Self, MetricsError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricsError::BadWeights(format!("{weights:?} has a negative or non-finite entry")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::BadWeights(format!("{weights:?} sums to {sum}")));
        }
        Ok(RqiWeights(weights))
    }

    pub fn get(self) -> [f64; 3] {
        self.0
    }
}

impl Default for RqiWeights {
    fn default() -> Self {
        RqiWeights([1.0 / 3.0; 3])
    }
}

/// `w1·depth/(depth+3) + w2·correction_ratio + w3·accuracy`.
pub fn reasoning_quality_index(
    depth: u32,
    correction_ratio: f64,
    accuracy: f64,
    weights: RqiWeights,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(MetricsError::BadAccuracy(accuracy));
    }
    if !(0.0..=1.0).contains(&correction_ratio) {
        return Err(MetricsError::BadAccuracy(correction_ratio));
    }
    let [w1, w2, w3] = weights.0;
    let d = f64::from(depth);
    let rqi = w1 * (d / (d + 3.0)) + w2 * correction_ratio + w3 * accuracy;
    Ok(rqi.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionMetrics {
    pub reflection_depth: u32,
    pub correction_ratio: f64,
    pub mean_revision_distance: f64,
    pub max_revision_distance: f64,
    pub falsification_events: u32,
    pub branch_count: u32,
    pub uncertainty_tag_count: u32,
    pub rqi: Option<f64>,
    pub s2_engagement: f64,
}

pub fn compute_session_metrics(
    events: &[TraceEvent],
    theta: Theta,
    accuracy: Option<f64>,
    weights: Option<RqiWeights>,
) -> Result<SessionMetrics, MetricsError> {
    let tally = TraceTally::from_events(events);
    let correction_ratio = tally.correction_ratio(theta)?;
    let reflection_depth = tally.reflection_depth();
    let distances: Vec<f64> = tally.revision_distances().collect();
    let mean_revision_distance = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    let max_revision_distance = distances.iter().copied().fold(0.0, f64::max);
    let rqi = accuracy
        .map(|a| {
            reasoning_quality_index(reflection_depth, correction_ratio, a, weights.unwrap_or_default())
        })
        .transpose()?;
    Ok(SessionMetrics {
        reflection_depth,
        correction_ratio,
        mean_revision_distance,
        max_revision_distance,
        falsification_events: tally.falsification_count(theta),
        branch_count: tally.branch_count(),
        uncertainty_tag_count: tally.uncertainty_tags,
        rqi,
        s2_engagement: tally.s2_engagement(theta),
    })
}

/// Exportable form: decimals as four-fractional-digit strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub reflection_depth: u32,
    pub correction_ratio: Fixed4,
    pub mean_revision_distance: Fixed4,
    pub max_revision_distance: Fixed4,
    pub falsification_events: u32,
    pub branch_count: u32,
    pub uncertainty_tag_count: u32,
    pub rqi: Option<Fixed4>,
    pub s2_engagement: Fixed4,
}

fn fixed(x: f64) -> Fixed4 {
    Fixed4::from_f64(x).expect("metric values are finite")
}

impl SessionMetrics {
    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            reflection_depth: self.reflection_depth,
            correction_ratio: fixed(self.correction_ratio),
            mean_revision_distance: fixed(self.mean_revision_distance),
            max_revision_distance: fixed(self.max_revision_distance),
            falsification_events: self.falsification_events,
            branch_count: self.branch_count,
            uncertainty_tag_count: self.uncertainty_tag_count,
            rqi: self.rqi.map(fixed),
            s2_engagement: fixed(self.s2_engagement),
        }
    }

    /// Canonical JSON keyed by metric name.
    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(&self.report()).expect("report holds no floats")
    }
}
