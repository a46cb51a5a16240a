//! Paired-completion runner. Builds conditioning prefixes from each side's
//! exemplar sentences, scores every target under both sides, and turns the
//! resulting deltas into framing labels.
//!
//! Pairing draws are derived from per-(target, side-label) RNG streams, so
//! swapping the two sides of a priming set reproduces the mirror image of
//! the same draws — which is what makes the label-flip property testable
//! down to the last bit.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::stable_hash;
use crate::logprob::{
    classify, conditional_logprob, delta, Classification, DeltaRecord, FramingLabel, LogProbError,
    ScoredConditional,
};
use crate::provider::{score_many, LanguageModel, ProviderError, ScoredSequence};

/// Ratio of model tokens to whitespace-split words assumed when projecting
/// token spend without a tokenizer on hand.
pub const DEFAULT_TOKEN_INFLATION: f64 = 1.3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("priming set: {0}")]
    InvalidPriming(String),
    #[error("target batch: {0}")]
    InvalidTargets(String),
    #[error("pairing plan: {0}")]
    InvalidPlan(String),
    #[error("cannot build a prompt from empty text")]
    EmptyText,
    #[error(transparent)]
    LogProb(#[from] LogProbError),
    #[error("provider: {0}")]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioner {
    pub id: String,
    pub text: String,
}

/// The two sides of a framing comparison: a display label and a pool of
/// conditioning sentences for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimingSet {
    pub label_a: String,
    pub label_b: String,
    pub side_a: Vec<Conditioner>,
    pub side_b: Vec<Conditioner>,
}

impl PrimingSet {
    pub fn new(
        label_a: impl Into<String>,
        label_b: impl Into<String>,
        side_a: Vec<Conditioner>,
        side_b: Vec<Conditioner>,
    ) -> Result<Self, EngineError> {
        let set = PrimingSet { label_a: label_a.into(), label_b: label_b.into(), side_a, side_b };
        set.validate()?;
        Ok(set)
    }

    pub fn from_texts(
        label_a: impl Into<String>,
        texts_a: &[String],
        label_b: impl Into<String>,
        texts_b: &[String],
    ) -> Result<Self, EngineError> {
        let side = |prefix: &str, texts: &[String]| {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Conditioner { id: format!("{prefix}{i}"), text: t.clone() })
                .collect()
        };
        PrimingSet::new(label_a, label_b, side("a", texts_a), side("b", texts_b))
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.label_a.trim().is_empty() || self.label_b.trim().is_empty() {
            return Err(EngineError::InvalidPriming("side labels must be non-empty".into()));
        }
        if self.label_a == self.label_b {
            return Err(EngineError::InvalidPriming(format!(
                "side labels must differ, both are `{}`",
                self.label_a
            )));
        }
        for (name, side) in [("A", &self.side_a), ("B", &self.side_b)] {
            if side.is_empty() {
                return Err(EngineError::InvalidPriming(format!("side {name} has no conditioners")));
            }
            let mut ids = HashSet::new();
            for c in side {
                if c.text.trim().is_empty() {
                    return Err(EngineError::InvalidPriming(format!(
                        "conditioner `{}` on side {name} is blank",
                        c.id
                    )));
                }
                if !ids.insert(&c.id) {
                    return Err(EngineError::InvalidPriming(format!(
                        "duplicate conditioner id `{}` on side {name}",
                        c.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// The same comparison with the sides exchanged, labels included.
    pub fn swapped(&self) -> PrimingSet {
        PrimingSet {
            label_a: self.label_b.clone(),
            label_b: self.label_a.clone(),
            side_a: self.side_b.clone(),
            side_b: self.side_a.clone(),
        }
    }

    /// Maps the engine's fixed A/B axis to this set's display labels.
    pub fn display_label(&self, label: FramingLabel) -> &str {
        match label {
            FramingLabel::A => &self.label_a,
            FramingLabel::B => &self.label_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBatch {
    pub targets: Vec<Target>,
}

impl TargetBatch {
    pub fn new(targets: Vec<Target>) -> Result<Self, EngineError> {
        if targets.is_empty() {
            return Err(EngineError::InvalidTargets("batch has no targets".into()));
        }
        let mut ids = HashSet::new();
        for t in &targets {
            if t.text.trim().is_empty() {
                return Err(EngineError::InvalidTargets(format!("target `{}` is blank", t.id)));
            }
            if !ids.insert(&t.id) {
                return Err(EngineError::InvalidTargets(format!("duplicate target id `{}`", t.id)));
            }
        }
        Ok(TargetBatch { targets })
    }
}

/// How many conditioners to concatenate per side (`k`), how many independent
/// draws to average per target, and the seed that fixes the draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub k: usize,
    pub repetitions: usize,
    pub rng_seed: u64,
}

impl PairingPlan {
    pub fn validate(&self, priming: &PrimingSet) -> Result<(), EngineError> {
        if !(self.k == 1 || self.k == 2) {
            return Err(EngineError::InvalidPlan(format!("k must be 1 or 2, got {}", self.k)));
        }
        if self.repetitions == 0 {
            return Err(EngineError::InvalidPlan("repetitions must be at least 1".into()));
        }
        if self.k > priming.side_a.len() || self.k > priming.side_b.len() {
            return Err(EngineError::InvalidPlan(format!(
                "k={} needs at least {} conditioners per side (have {} and {})",
                self.k,
                self.k,
                priming.side_a.len(),
                priming.side_b.len()
            )));
        }
        Ok(())
    }
}

fn ensure_terminal_punctuation(text: &mut String) {
    match text.chars().last() {
        Some('.') | Some('!') | Some('?') => {}
        _ => text.push('.'),
    }
}

/// Joins conditioner texts into one prose prefix: each trimmed of trailing
/// whitespace, given a terminal period if it lacks closing punctuation, and
/// separated by single spaces. No trailing space.
pub fn conditioner_prefix(texts: &[&str]) -> Result<String, EngineError> {
    if texts.is_empty() {
        return Err(EngineError::EmptyText);
    }
    let mut parts = Vec::with_capacity(texts.len());
    for t in texts {
        let mut piece = t.trim_end().to_string();
        if piece.is_empty() {
            return Err(EngineError::EmptyText);
        }
        ensure_terminal_punctuation(&mut piece);
        parts.push(piece);
    }
    Ok(parts.join(" "))
}

fn join_prefix_target(prefix: &str, target: &str) -> String {
    format!("{prefix} {target}")
}

/// Builds the joint prompt: conditioning prefix, a single space, then the
/// target verbatim.
pub fn concatenate(texts: &[&str], target: &str) -> Result<String, EngineError> {
    if target.trim().is_empty() {
        return Err(EngineError::EmptyText);
    }
    Ok(join_prefix_target(&conditioner_prefix(texts)?, target))
}

/// Indices into each side's conditioner pool for one draw, in sample order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairingDraw {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPlan {
    pub target_index: usize,
    pub draws: Vec<PairingDraw>,
}

fn side_rng(seed: u64, target_id: &str, side_label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[
        &seed.to_le_bytes(),
        target_id.as_bytes(),
        side_label.as_bytes(),
    ]))
}

fn draw_without_replacement(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let idx = rng.random_range(0..len);
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    picked
}

/// Decides which conditioners pair with which target, deterministically from
/// the plan's seed. Repeated draws for one target avoid repeating an earlier
/// draw where the pools allow it.
pub fn plan_pairings(
    priming: &PrimingSet,
    batch: &TargetBatch,
    plan: &PairingPlan,
) -> Result<Vec<TargetPlan>, EngineError> {
    plan.validate(priming)?;
    let mut out = Vec::with_capacity(batch.targets.len());
    for (target_index, target) in batch.targets.iter().enumerate() {
        let mut rng_a = side_rng(plan.rng_seed, &target.id, &priming.label_a);
        let mut rng_b = side_rng(plan.rng_seed, &target.id, &priming.label_b);
        let mut seen: HashSet<PairingDraw> = HashSet::new();
        let mut draws = Vec::with_capacity(plan.repetitions);
        for _ in 0..plan.repetitions {
            let mut draw = PairingDraw {
                a: draw_without_replacement(&mut rng_a, priming.side_a.len(), plan.k),
                b: draw_without_replacement(&mut rng_b, priming.side_b.len(), plan.k),
            };
            let mut tries = 0;
            while seen.contains(&draw) && tries < 16 {
                draw = PairingDraw {
                    a: draw_without_replacement(&mut rng_a, priming.side_a.len(), plan.k),
                    b: draw_without_replacement(&mut rng_b, priming.side_b.len(), plan.k),
                };
                tries += 1;
            }
            seen.insert(draw.clone());
            draws.push(draw);
        }
        out.push(TargetPlan { target_index, draws });
    }
    Ok(out)
}

/// What a run will cost before running it: distinct texts the provider must
/// score (prefixes and joints shared across draws are counted once) and a
/// token projection from whitespace words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEstimate {
    pub provider_calls: usize,
    pub estimated_tokens: u64,
}

pub fn estimate_calls(
    priming: &PrimingSet,
    batch: &TargetBatch,
    plan: &PairingPlan,
) -> Result<CallEstimate, EngineError> {
    estimate_calls_with(priming, batch, plan, DEFAULT_TOKEN_INFLATION)
}

pub fn estimate_calls_with(
    priming: &PrimingSet,
    batch: &TargetBatch,
    plan: &PairingPlan,
    token_inflation: f64,
) -> Result<CallEstimate, EngineError> {
    if !(token_inflation.is_finite() && token_inflation > 0.0) {
        return Err(EngineError::InvalidPlan(format!(
            "token inflation must be positive, got {token_inflation}"
        )));
    }
    let plans = plan_pairings(priming, batch, plan)?;
    let mut texts: BTreeSet<String> = BTreeSet::new();
    for tp in &plans {
        let target = &batch.targets[tp.target_index];
        for draw in &tp.draws {
            for (side, idxs) in [(&priming.side_a, &draw.a), (&priming.side_b, &draw.b)] {
                let picked: Vec<&str> = idxs.iter().map(|&i| side[i].text.as_str()).collect();
                let prefix = conditioner_prefix(&picked)?;
                texts.insert(join_prefix_target(&prefix, &target.text));
                texts.insert(prefix);
            }
        }
    }
    let words: usize = texts.iter().map(|t| t.split_whitespace().count()).sum();
    Ok(CallEstimate {
        provider_calls: texts.len(),
        estimated_tokens: (words as f64 * token_inflation).ceil() as u64,
    })
}

/// Verdict for one target: the label, the averaged delta behind it, and the
/// per-draw records for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOutcome {
    pub target_id: String,
    pub label: FramingLabel,
    pub aggregate_delta: f64,
    pub tie: bool,
    pub records: Vec<DeltaRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFailure {
    pub target_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRunOutcome {
    pub outcomes: Vec<TargetOutcome>,
    pub failures: Vec<TargetFailure>,
    /// Distinct texts sent to the provider (what a cold cache pays for).
    pub distinct_texts: usize,
}

struct DrawStrings {
    a_id: String,
    b_id: String,
    prefix_a: usize,
    joint_a: usize,
    prefix_b: usize,
    joint_b: usize,
}

fn intern(texts: &mut Vec<String>, index: &mut HashMap<String, usize>, text: String) -> usize {
    if let Some(&i) = index.get(&text) {
        return i;
    }
    let i = texts.len();
    index.insert(text.clone(), i);
    texts.push(text);
    i
}

fn is_systemic(err: &ProviderError) -> bool {
    matches!(
        err,
        ProviderError::Capability { .. } | ProviderError::Config(_) | ProviderError::InvalidRequest(_)
    )
}

/// Runs the full paired comparison. Each distinct text is scored exactly
/// once; targets whose scoring fails end up in `failures` instead of
/// silently defaulting, while configuration-level errors abort the run.
pub fn run_paired(
    priming: &PrimingSet,
    batch: &TargetBatch,
    plan: &PairingPlan,
    provider: &dyn LanguageModel,
) -> Result<PairedRunOutcome, EngineError> {
    let plans = plan_pairings(priming, batch, plan)?;

    let mut texts: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut draw_strings: Vec<Vec<DrawStrings>> = Vec::with_capacity(plans.len());
    for tp in &plans {
        let target = &batch.targets[tp.target_index];
        let mut per_target = Vec::with_capacity(tp.draws.len());
        for draw in &tp.draws {
            let picked_a: Vec<&str> = draw.a.iter().map(|&i| priming.side_a[i].text.as_str()).collect();
            let picked_b: Vec<&str> = draw.b.iter().map(|&i| priming.side_b[i].text.as_str()).collect();
            let prefix_a = conditioner_prefix(&picked_a)?;
            let prefix_b = conditioner_prefix(&picked_b)?;
            let joint_a = join_prefix_target(&prefix_a, &target.text);
            let joint_b = join_prefix_target(&prefix_b, &target.text);
            per_target.push(DrawStrings {
                a_id: draw.a.iter().map(|&i| priming.side_a[i].id.as_str()).collect::<Vec<_>>().join("+"),
                b_id: draw.b.iter().map(|&i| priming.side_b[i].id.as_str()).collect::<Vec<_>>().join("+"),
                prefix_a: intern(&mut texts, &mut index, prefix_a),
                joint_a: intern(&mut texts, &mut index, joint_a),
                prefix_b: intern(&mut texts, &mut index, prefix_b),
                joint_b: intern(&mut texts, &mut index, joint_b),
            });
        }
        draw_strings.push(per_target);
    }

    let scored = score_many(provider, &texts);
    for result in &scored {
        if let Err(e) = result {
            if is_systemic(e) {
                return Err(EngineError::Provider(clone_provider_error(e)));
            }
        }
    }

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    'targets: for (tp, draws) in plans.iter().zip(&draw_strings) {
        let target = &batch.targets[tp.target_index];
        let mut records = Vec::with_capacity(draws.len());
        for ds in draws {
            let get = |i: usize| -> Result<&ScoredSequence, String> {
                scored[i].as_ref().map_err(|e| e.to_string())
            };
            let (pa, ja, pb, jb) = match (get(ds.prefix_a), get(ds.joint_a), get(ds.prefix_b), get(ds.joint_b)) {
                (Ok(pa), Ok(ja), Ok(pb), Ok(jb)) => (pa, ja, pb, jb),
                (a, b, c, d) => {
                    let error = [a.err(), b.err(), c.err(), d.err()]
                        .into_iter()
                        .flatten()
                        .next()
                        .unwrap_or_else(|| "unknown scoring failure".into());
                    failures.push(TargetFailure { target_id: target.id.clone(), error });
                    continue 'targets;
                }
            };
            let lp_a = conditional_logprob(pa.total.value(), ja.total.value())?;
            let lp_b = conditional_logprob(pb.total.value(), jb.total.value())?;
            let side_a = ScoredConditional {
                conditioner_id: ds.a_id.clone(),
                target_id: target.id.clone(),
                lp: lp_a,
            };
            let side_b = ScoredConditional {
                conditioner_id: ds.b_id.clone(),
                target_id: target.id.clone(),
                lp: lp_b,
            };
            records.push(delta(&side_a, &side_b)?);
        }
        let Classification { target_id, label, aggregate_delta, tie } = classify(&records)?;
        outcomes.push(TargetOutcome { target_id, label, aggregate_delta, tie, records });
    }

    Ok(PairedRunOutcome { outcomes, failures, distinct_texts: texts.len() })
}

fn clone_provider_error(err: &ProviderError) -> ProviderError {
    match err {
        ProviderError::Capability { model, operation } => {
            ProviderError::Capability { model: model.clone(), operation }
        }
        ProviderError::Config(msg) => ProviderError::Config(msg.clone()),
        ProviderError::InvalidRequest(msg) => ProviderError::InvalidRequest(msg.clone()),
        other => ProviderError::Protocol(other.to_string()),
    }
}
