use super::MetricsError;

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(MetricsError::TooFewPairs(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(MetricsError::NotFinite);
    }
    pearson(&average_ranks(xs), &average_ranks(ys)).ok_or(MetricsError::ZeroVariance)
}

/// Stated confidence paired with whether the answer turned out correct.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CalibrationInput {
    pub pairs: Vec<(f64, bool)>,
}

impl CalibrationInput {
    pub fn new(pairs: impl IntoIterator<Item = (f64, bool)>) -> Self {
        CalibrationInput {
            pairs: pairs.into_iter().collect(),
        }
    }
}

/// Rank correlation between confidence and correctness (coded 0/1).
pub fn confidence_calibration(input: &CalibrationInput) -> Result<f64, MetricsError> {
    if input.pairs.len() < 3 {
        return Err(MetricsError::TooFewPairs(input.pairs.len()));
    }
    if let Some((c, _)) = input.pairs.iter().find(|(c, _)| !(0.0..=1.0).contains(c)) {
        return Err(MetricsError::InvalidConfidence(*c));
    }
    let conf: Vec<f64> = input.pairs.iter().map(|p| p.0).collect();
    let correct: Vec<f64> = input.pairs.iter().map(|p| f64::from(u8::from(p.1))).collect();
    spearman(&conf, &correct)
}
