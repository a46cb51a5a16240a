//! Log-probability primitives: conditional scores, paired deltas, and the
//! aggregation that turns a batch of deltas into a framing call.
//!
//! The central quantity is `delta = lp(x | s_a) - lp(x | s_b)`: how much more
//! likely a target continuation is under conditioner A than under
//! conditioner B. Positive means side A, negative means side B. Each
//! conditional is itself a difference of two sequence totals, so priors over
//! the conditioners cancel out of the comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogProbError {
    #[error("non-finite log-probability in field `{field}`: {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("target mismatch: left side scored `{left}`, right side scored `{right}`")]
    TargetMismatch { left: String, right: String },
    #[error("cannot classify an empty delta batch")]
    EmptyBatch,
    #[error("delta batch mixes targets `{first}` and `{other}`")]
    MixedTargets { first: String, other: String },
}

/// Total log-probability of a full token sequence. Always finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProbTotal(f64);

impl LogProbTotal {
    pub fn new(value: f64) -> Result<Self, LogProbError> {
        if !value.is_finite() {
            return Err(LogProbError::NonFinite { field: "total", value });
        }
        Ok(LogProbTotal(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Log-probability of a target continuation given a conditioning prefix,
/// computed as the difference of two sequence totals:
/// `lp(x|s) = lp(s + x) - lp(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLogProb {
    pub prefix_total: LogProbTotal,
    pub joint_total: LogProbTotal,
    pub value: f64,
}

/// Builds a conditional from the two raw sequence totals. Rejects non-finite
/// input, naming the offending field.
pub fn conditional_logprob(
    prefix_total: f64,
    joint_total: f64,
) -> Result<ConditionalLogProb, LogProbError> {
    if !prefix_total.is_finite() {
        return Err(LogProbError::NonFinite { field: "prefix_total", value: prefix_total });
    }
    if !joint_total.is_finite() {
        return Err(LogProbError::NonFinite { field: "joint_total", value: joint_total });
    }
    Ok(ConditionalLogProb {
        prefix_total: LogProbTotal(prefix_total),
        joint_total: LogProbTotal(joint_total),
        value: joint_total - prefix_total,
    })
}

/// A conditional score tagged with which conditioner and which target
/// produced it, so deltas can only be formed over the same target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredConditional {
    pub conditioner_id: String,
    pub target_id: String,
    pub lp: ConditionalLogProb,
}

/// One paired comparison: the same target scored under a side-A and a side-B
/// conditioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub conditioner_a_id: String,
    pub conditioner_b_id: String,
    pub target_id: String,
    pub lp_a: f64,
    pub lp_b: f64,
    pub delta: f64,
}

impl DeltaRecord {
    /// The same comparison with the sides' roles exchanged. `delta` is the
    /// exact negation of the original.
    pub fn swapped(&self) -> DeltaRecord {
        DeltaRecord {
            conditioner_a_id: self.conditioner_b_id.clone(),
            conditioner_b_id: self.conditioner_a_id.clone(),
            target_id: self.target_id.clone(),
            lp_a: self.lp_b,
            lp_b: self.lp_a,
            delta: self.lp_b - self.lp_a,
        }
    }
}

/// Forms the paired delta for one target. Errors if the two conditionals
/// were scored against different targets.
pub fn delta(a: &ScoredConditional, b: &ScoredConditional) -> Result<DeltaRecord, LogProbError> {
    if a.target_id != b.target_id {
        return Err(LogProbError::TargetMismatch {
            left: a.target_id.clone(),
            right: b.target_id.clone(),
        });
    }
    Ok(DeltaRecord {
        conditioner_a_id: a.conditioner_id.clone(),
        conditioner_b_id: b.conditioner_id.clone(),
        target_id: a.target_id.clone(),
        lp_a: a.lp.value,
        lp_b: b.lp.value,
        delta: a.lp.value - b.lp.value,
    })
}

/// Which side of the framing pair a target aligns with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FramingLabel {
    A,
    B,
}

impl FramingLabel {
    /// Decision rule shared by every classifier in the crate: positive
    /// delta-like score means A, negative means B, and an exact zero is
    /// resolved to B with the tie flag set.
    pub fn from_delta(value: f64) -> (FramingLabel, bool) {
        if value > 0.0 {
            (FramingLabel::A, false)
        } else if value < 0.0 {
            (FramingLabel::B, false)
        } else {
            (FramingLabel::B, true)
        }
    }

    pub fn opposite(self) -> FramingLabel {
        match self {
            FramingLabel::A => FramingLabel::B,
            FramingLabel::B => FramingLabel::A,
        }
    }
}

impl std::fmt::Display for FramingLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FramingLabel::A => write!(f, "A"),
            FramingLabel::B => write!(f, "B"),
        }
    }
}

/// Aggregated decision for one target over all its delta records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub target_id: String,
    pub label: FramingLabel,
    pub aggregate_delta: f64,
    pub tie: bool,
}

/// Averages a batch of deltas for a single target and applies the sign rule.
///
/// Deltas are summed in a fixed (sorted) order so the result does not depend
/// on how the batch happened to be arranged.
pub fn classify(records: &[DeltaRecord]) -> Result<Classification, LogProbError> {
    let first = records.first().ok_or(LogProbError::EmptyBatch)?;
    for r in records {
        if r.target_id != first.target_id {
            return Err(LogProbError::MixedTargets {
                first: first.target_id.clone(),
                other: r.target_id.clone(),
            });
        }
    }
    let mut deltas: Vec<f64> = records.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    let aggregate = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let (label, tie) = FramingLabel::from_delta(aggregate);
    Ok(Classification { target_id: first.target_id.clone(), label, aggregate_delta: aggregate, tie })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(cond: &str, target: &str, prefix: f64, joint: f64) -> ScoredConditional {
        ScoredConditional {
            conditioner_id: cond.to_string(),
            target_id: target.to_string(),
            lp: conditional_logprob(prefix, joint).unwrap(),
        }
    }

    #[test]
    fn conditional_is_joint_minus_prefix() {
        let lp = conditional_logprob(-5.0, -12.0).unwrap();
        assert_eq!(lp.value, -7.0);
        let zero = conditional_logprob(-3.25, -3.25).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn conditional_rejects_non_finite_naming_field() {
        let err = conditional_logprob(f64::NAN, -1.0).unwrap_err();
        assert!(err.to_string().contains("prefix_total"));
        let err = conditional_logprob(-1.0, f64::INFINITY).unwrap_err();
        assert!(err.to_string().contains("joint_total"));
    }

    #[test]
    fn delta_subtracts_b_from_a() {
        let a = scored("a0", "t", -10.0, -17.0); // lp_a = -7.0
        let b = scored("b0", "t", -10.0, -19.5); // lp_b = -9.5
        let rec = delta(&a, &b).unwrap();
        assert_eq!(rec.delta, 2.5);
        assert_eq!(rec.lp_a, -7.0);
        assert_eq!(rec.lp_b, -9.5);
    }

    #[test]
    fn delta_refuses_mismatched_targets() {
        let a = scored("a0", "t1", -1.0, -2.0);
        let b = scored("b0", "t2", -1.0, -2.0);
        assert!(matches!(delta(&a, &b), Err(LogProbError::TargetMismatch { .. })));
    }

    #[test]
    fn swap_negates_exactly() {
        let a = scored("a0", "t", -4.5, -9.25);
        let b = scored("b0", "t", -3.0, -11.125);
        let rec = delta(&a, &b).unwrap();
        let swapped = rec.swapped();
        assert_eq!(swapped.delta, -rec.delta);
        assert_eq!(swapped.conditioner_a_id, "b0");
        assert_eq!(swapped.conditioner_b_id, "a0");
    }

    fn rec(target: &str, d: f64) -> DeltaRecord {
        DeltaRecord {
            conditioner_a_id: "a".into(),
            conditioner_b_id: "b".into(),
            target_id: target.into(),
            lp_a: d,
            lp_b: 0.0,
            delta: d,
        }
    }

    #[test]
    fn classify_means_and_labels() {
        let out = classify(&[rec("t", 2.5)]).unwrap();
        assert_eq!(out.label, FramingLabel::A);
        assert_eq!(out.aggregate_delta, 2.5);
        assert!(!out.tie);

        let out = classify(&[rec("t", 0.5), rec("t", 1.5), rec("t", -0.4)]).unwrap();
        assert_eq!(out.label, FramingLabel::A);
        assert!((out.aggregate_delta - 1.6 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_zero_is_b_with_tie_flag() {
        let out = classify(&[rec("t", 1.0), rec("t", -1.0)]).unwrap();
        assert_eq!(out.aggregate_delta, 0.0);
        assert_eq!(out.label, FramingLabel::B);
        assert!(out.tie);
    }

    #[test]
    fn classify_rejects_empty_and_mixed() {
        assert!(matches!(classify(&[]), Err(LogProbError::EmptyBatch)));
        let err = classify(&[rec("t1", 1.0), rec("t2", 1.0)]).unwrap_err();
        assert!(matches!(err, LogProbError::MixedTargets { .. }));
    }

    #[test]
    fn from_delta_sign_rule() {
        assert_eq!(FramingLabel::from_delta(1e-300), (FramingLabel::A, false));
        assert_eq!(FramingLabel::from_delta(-1e-300), (FramingLabel::B, false));
        assert_eq!(FramingLabel::from_delta(0.0), (FramingLabel::B, true));
        assert_eq!(FramingLabel::from_delta(-0.0), (FramingLabel::B, true));
    }
}
