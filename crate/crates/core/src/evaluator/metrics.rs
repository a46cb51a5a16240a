//! Classification metrics over framing predictions: F1 with explicit
//! handling of failed items, bootstrap and replicate confidence intervals,
//! and directional bias with a significance call.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logprob::FramingLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no data: {0}")]
    Empty(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("bias undefined: no items with true label {0}")]
    EmptyRow(FramingLabel),
    #[error("degenerate bootstrap: {0}")]
    Degenerate(String),
}

/// One evaluated item: the true side and what the classifier said, if it
/// managed to say anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub id: String,
    pub truth: FramingLabel,
    pub predicted: Option<FramingLabel>,
}

fn label_index(label: FramingLabel) -> usize {
    match label {
        FramingLabel::A => 0,
        FramingLabel::B => 1,
    }
}

/// 2x2 confusion counts indexed `[truth][predicted]`, with per-truth-class
/// failure counts kept separately. A failed item never counts as a
/// prediction, but it does count against recall of its true class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
    pub failures: [u64; 2],
}

impl ConfusionMatrix {
    pub fn from_outcomes(outcomes: &[ItemOutcome]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for o in outcomes {
            match o.predicted {
                Some(pred) => cm.counts[label_index(o.truth)][label_index(pred)] += 1,
                None => cm.failures[label_index(o.truth)] += 1,
            }
        }
        cm
    }

    pub fn predicted_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn total(&self) -> u64 {
        self.predicted_total() + self.failures[0] + self.failures[1]
    }
}

/// F1 for the given positive class: `tp / (tp + (fp + fn)/2)`, where failed
/// items of the positive class count as false negatives. `None` when the
/// denominator is zero — never a NaN smuggled into downstream math.
pub fn f1(cm: &ConfusionMatrix, positive: FramingLabel) -> Option<f64> {
    let p = label_index(positive);
    let q = 1 - p;
    let tp = cm.counts[p][p] as f64;
    let fp = cm.counts[q][p] as f64;
    let fn_ = (cm.counts[p][q] + cm.failures[p]) as f64;
    let denom = tp + 0.5 * (fp + fn_);
    if denom == 0.0 {
        None
    } else {
        Some(tp / denom)
    }
}

/// How the interval around a point estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Bootstrap,
    Replicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWithCi {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: CiMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub replicates: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams { replicates: 100, sample_size: 1000, seed: 0 }
    }
}

/// Linear-interpolation percentile over an already-sorted slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

fn percentile_interval(values: &mut Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (percentile(values, 0.025), percentile(values, 0.975))
}

/// Percentile-bootstrap interval for F1 over item-level resamples. The
/// interval is widened, if needed, to contain the full-sample point
/// estimate, so `ci_low <= point <= ci_high` always holds.
pub fn bootstrap_f1_ci(
    outcomes: &[ItemOutcome],
    positive: FramingLabel,
    params: &BootstrapParams,
) -> Result<MetricWithCi, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::Empty("no outcomes to bootstrap".into()));
    }
    if params.replicates == 0 || params.sample_size == 0 {
        return Err(EvalError::Degenerate("replicates and sample_size must be positive".into()));
    }
    let point = f1(&ConfusionMatrix::from_outcomes(outcomes), positive)
        .ok_or_else(|| EvalError::Undefined(format!("F1({positive}) on the full sample")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut replica_scores = Vec::with_capacity(params.replicates);
    for _ in 0..params.replicates {
        let mut cm = ConfusionMatrix::default();
        for _ in 0..params.sample_size {
            let o = &outcomes[rng.random_range(0..outcomes.len())];
            match o.predicted {
                Some(pred) => cm.counts[label_index(o.truth)][label_index(pred)] += 1,
                None => cm.failures[label_index(o.truth)] += 1,
            }
        }
        if let Some(score) = f1(&cm, positive) {
            replica_scores.push(score);
        }
    }
    let (ci_low, ci_high) = if replica_scores.is_empty() {
        (point, point)
    } else {
        percentile_interval(&mut replica_scores)
    };
    Ok(MetricWithCi {
        point,
        ci_low: ci_low.min(point),
        ci_high: ci_high.max(point),
        method: CiMethod::Bootstrap,
    })
}

/// Normal-approximation interval over per-replicate scores:
/// mean ± 1.96 · s/√r. Used where each training replicate yields one score.
pub fn replicate_ci(scores: &[f64]) -> Result<MetricWithCi, EvalError> {
    if scores.len() < 2 {
        return Err(EvalError::Empty(format!(
            "replicate interval needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let half_width = {
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        1.96 * var.sqrt() / n.sqrt()
    };
    Ok(MetricWithCi {
        point: mean,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        method: CiMethod::Replicate,
    })
}

/// Directional error asymmetry: with rows of the confusion matrix
/// normalized, `rate(A mistaken for B) - rate(B mistaken for A)`.
/// Positive means the classifier leans toward B when it is wrong.
pub fn bias(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let row_a = (cm.counts[0][0] + cm.counts[0][1]) as f64;
    let row_b = (cm.counts[1][0] + cm.counts[1][1]) as f64;
    if row_a == 0.0 {
        return Err(EvalError::EmptyRow(FramingLabel::A));
    }
    if row_b == 0.0 {
        return Err(EvalError::EmptyRow(FramingLabel::B));
    }
    Ok(cm.counts[0][1] as f64 / row_a - cm.counts[1][0] as f64 / row_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub bias: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// True when the interval excludes zero.
    pub significant: bool,
    /// Resamples that had both rows populated and contributed to the CI.
    pub replicates_used: usize,
}

/// Bias with a bootstrap interval: cells are resampled multinomially with
/// the matrix's own proportions; resamples that lose an entire true class
/// are skipped. Significance = the interval excludes zero.
pub fn bias_with_ci(cm: &ConfusionMatrix, params: &BootstrapParams) -> Result<BiasEstimate, EvalError> {
    let point = bias(cm)?;
    let flat = [cm.counts[0][0], cm.counts[0][1], cm.counts[1][0], cm.counts[1][1]];
    let total: u64 = flat.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut replica_scores = Vec::with_capacity(params.replicates);
    for _ in 0..params.replicates {
        let mut resampled = ConfusionMatrix::default();
        for _ in 0..total {
            let mut pick = rng.random_range(0..total);
            for (cell, &count) in flat.iter().enumerate() {
                if pick < count {
                    resampled.counts[cell / 2][cell % 2] += 1;
                    break;
                }
                pick -= count;
            }
        }
        if let Ok(b) = bias(&resampled) {
            replica_scores.push(b);
        }
    }
    if replica_scores.len() < 2 {
        return Err(EvalError::Degenerate(format!(
            "only {} of {} bias resamples had both classes",
            replica_scores.len(),
            params.replicates
        )));
    }
    let replicates_used = replica_scores.len();
    let (raw_low, raw_high) = percentile_interval(&mut replica_scores);
    let ci_low = raw_low.min(point);
    let ci_high = raw_high.max(point);
    let significant = ci_low > 0.0 || ci_high < 0.0;
    Ok(BiasEstimate { bias: point, ci_low, ci_high, significant, replicates_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(truth: FramingLabel, predicted: Option<FramingLabel>) -> ItemOutcome {
        ItemOutcome { id: format!("{truth}:{predicted:?}"), truth, predicted }
    }

    fn matrix(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix { counts, failures: [0, 0] }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let cm = matrix([[10, 0], [0, 10]]);
        assert_eq!(f1(&cm, FramingLabel::A), Some(1.0));
        assert_eq!(f1(&cm, FramingLabel::B), Some(1.0));
    }

    #[test]
    fn f1_counts_failures_as_false_negatives() {
        // Truth A: 8 right, 1 wrong, 1 failed. Truth B: 9 right, 1 wrong.
        let mut outcomes = Vec::new();
        for _ in 0..8 {
            outcomes.push(outcome(FramingLabel::A, Some(FramingLabel::A)));
        }
        outcomes.push(outcome(FramingLabel::A, Some(FramingLabel::B)));
        outcomes.push(outcome(FramingLabel::A, None));
        for _ in 0..9 {
            outcomes.push(outcome(FramingLabel::B, Some(FramingLabel::B)));
        }
        outcomes.push(outcome(FramingLabel::B, Some(FramingLabel::A)));

        let cm = ConfusionMatrix::from_outcomes(&outcomes);
        assert_eq!(cm.counts, [[8, 1], [1, 9]]);
        assert_eq!(cm.failures, [1, 0]);
        // tp=8, fp=1, fn=1+1: 8 / (8 + 0.5*3)
        assert_eq!(f1(&cm, FramingLabel::A), Some(8.0 / 9.5));
    }

    #[test]
    fn undefined_f1_is_none_not_nan() {
        let cm = matrix([[0, 0], [0, 10]]);
        assert_eq!(f1(&cm, FramingLabel::A), None);
        assert_eq!(f1(&cm, FramingLabel::B), Some(1.0));
    }

    #[test]
    fn percentiles_interpolate_linearly() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&sorted, 0.0), 1.0);
        assert_eq!(percentile(&sorted, 1.0), 4.0);
        assert_eq!(percentile(&sorted, 0.5), 2.5);
        assert!((percentile(&sorted, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn replicate_ci_matches_hand_computation() {
        let ci = replicate_ci(&[0.7, 0.9]).unwrap();
        assert_eq!(ci.point, 0.8);
        // s = sqrt(0.02), half-width = 1.96*s/sqrt(2) = 1.96*0.1
        assert!((ci.ci_high - 0.996).abs() < 1e-12);
        assert!((ci.ci_low - 0.604).abs() < 1e-12);
        assert_eq!(ci.method, CiMethod::Replicate);

        assert!(replicate_ci(&[0.5]).is_err());
        assert!(replicate_ci(&[]).is_err());

        let flat = replicate_ci(&[0.8, 0.8, 0.8]).unwrap();
        assert!((flat.point - 0.8).abs() < 1e-12);
        assert!(flat.ci_high - flat.ci_low < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic_and_contains_point() {
        let mut outcomes = Vec::new();
        for i in 0..40 {
            let truth = if i % 2 == 0 { FramingLabel::A } else { FramingLabel::B };
            let predicted = if i % 7 == 0 { Some(truth.opposite()) } else { Some(truth) };
            outcomes.push(outcome(truth, predicted));
        }
        let params = BootstrapParams { replicates: 50, sample_size: 200, seed: 9 };
        let first = bootstrap_f1_ci(&outcomes, FramingLabel::A, &params).unwrap();
        let second = bootstrap_f1_ci(&outcomes, FramingLabel::A, &params).unwrap();
        assert_eq!(first, second);
        assert!(first.ci_low <= first.point && first.point <= first.ci_high);
        assert!(first.ci_low < first.ci_high);
    }

    #[test]
    fn symmetric_confusion_has_zero_bias() {
        assert_eq!(bias(&matrix([[8, 2], [2, 8]])).unwrap(), 0.0);
        assert_eq!(bias(&matrix([[10, 0], [0, 10]])).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_example_and_exact_sign_flip() {
        let cm = matrix([[8, 2], [0, 10]]);
        assert_eq!(bias(&cm).unwrap(), 0.2);
        // Relabeling the classes transposes the matrix through the center.
        let relabeled = matrix([[10, 0], [2, 8]]);
        assert_eq!(bias(&relabeled).unwrap(), -0.2);
        assert_eq!(bias(&relabeled).unwrap(), -bias(&cm).unwrap());
    }

    #[test]
    fn bias_needs_both_rows() {
        let err = bias(&matrix([[0, 0], [5, 5]])).unwrap_err();
        assert!(matches!(err, EvalError::EmptyRow(FramingLabel::A)));
    }

    #[test]
    fn bias_significance_from_resampling() {
        // sample_size is not used for bias: cells are resampled at the
        // matrix's own total.
        let params = BootstrapParams { replicates: 200, sample_size: 1000, seed: 3 };
        // Strong asymmetry on a decent sample: significant.
        let strong = bias_with_ci(&matrix([[60, 40], [2, 98]]), &params).unwrap();
        assert!(strong.significant, "interval [{}, {}]", strong.ci_low, strong.ci_high);
        assert!(strong.ci_low <= strong.bias && strong.bias <= strong.ci_high);
        // Symmetric errors: not significant.
        let weak = bias_with_ci(&matrix([[45, 5], [5, 45]]), &params).unwrap();
        assert!(!weak.significant, "interval [{}, {}]", weak.ci_low, weak.ci_high);
    }
}
