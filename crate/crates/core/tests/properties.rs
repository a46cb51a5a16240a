//! Randomized invariant checks. Each property pins down an algebraic fact
//! the rest of the toolkit leans on: antisymmetry of paired deltas, shift
//! invariance of conditionals, order independence of aggregation, agreement
//! of the n-gram scorer with a from-scratch recount, and the mirror symmetry
//! of a full side-swapped run.

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use framealign::{
    classify, conditional_logprob, delta, run_paired, DeltaRecord, FramingLabel, LanguageModel,
    NGramModel, PairingPlan, PrimingSet, ScoredConditional, Target, TargetBatch,
};

fn scored(cond: &str, target: &str, prefix: f64, joint: f64) -> ScoredConditional {
    ScoredConditional {
        conditioner_id: cond.into(),
        target_id: target.into(),
        lp: conditional_logprob(prefix, joint).unwrap(),
    }
}

proptest! {
    #[test]
    fn delta_is_antisymmetric(
        pa in -1e6..0.0f64,
        ja in -1e6..0.0f64,
        pb in -1e6..0.0f64,
        jb in -1e6..0.0f64,
    ) {
        let a = scored("a0", "t", pa, ja);
        let b = scored("b0", "t", pb, jb);
        let ab = delta(&a, &b).unwrap();
        let ba = delta(&b, &a).unwrap();

        prop_assert_eq!(ab.delta, -ba.delta);
        if ab.delta != 0.0 {
            // IEEE subtraction is correctly rounded, so the negation is exact
            // down to the bit pattern whenever the result is nonzero.
            prop_assert_eq!(ab.delta.to_bits(), (-ba.delta).to_bits());
        }
        prop_assert_eq!(ab.swapped(), ba.clone());

        let (label_ab, tie_ab) = FramingLabel::from_delta(ab.delta);
        let (label_ba, tie_ba) = FramingLabel::from_delta(ba.delta);
        prop_assert_eq!(tie_ab, tie_ba);
        if !tie_ab {
            prop_assert_eq!(label_ab, label_ba.opposite());
        }
    }

    #[test]
    fn conditional_ignores_a_shared_offset(
        prefix in -1e5..0.0f64,
        joint in -1e5..0.0f64,
        offset in -100.0..100.0f64,
    ) {
        let base = conditional_logprob(prefix, joint).unwrap().value;
        let shifted = conditional_logprob(prefix + offset, joint + offset).unwrap().value;
        prop_assert!((base - shifted).abs() <= 1e-9, "base {base}, shifted {shifted}");
    }

    #[test]
    fn classification_does_not_depend_on_record_order(
        deltas in prop::collection::vec(-50.0..50.0f64, 1..40),
        seed in any::<u64>(),
    ) {
        let records: Vec<DeltaRecord> = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| DeltaRecord {
                conditioner_a_id: format!("a{i}"),
                conditioner_b_id: format!("b{i}"),
                target_id: "t".into(),
                lp_a: d,
                lp_b: 0.0,
                delta: d,
            })
            .collect();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let original = classify(&records).unwrap();
        let permuted = classify(&shuffled).unwrap();
        prop_assert_eq!(
            original.aggregate_delta.to_bits(),
            permuted.aggregate_delta.to_bits()
        );
        prop_assert_eq!(original.label, permuted.label);
        prop_assert_eq!(original.tie, permuted.tie);
    }

    #[test]
    fn ngram_scoring_matches_a_from_scratch_recount(
        corpus in prop::collection::vec("[a-d ]{1,20}", 1..5),
        order in 1..=4usize,
        alpha in 0.05..2.0f64,
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..15),
    ) {
        let charset: Vec<char> = corpus
            .iter()
            .flat_map(|s| s.chars())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let text: String = picks.iter().map(|ix| charset[ix.index(charset.len())]).collect();

        let model = NGramModel::fit(&corpus, order, alpha).unwrap();
        let total = model.score_text(&text).unwrap().total.value();
        let expected = oracle_total(&corpus, order, alpha, &text);
        prop_assert!(
            (total - expected).abs() <= 1e-9,
            "model {total}, oracle {expected}, text {text:?}"
        );
    }
}

/// Independent recount of the smoothed chain rule: counts every context
/// length up to the order, then scores the text position by position with
/// `(count + alpha) / (total + alpha * |V|)`. Shares no code with the model.
fn oracle_total(corpus: &[String], order: usize, alpha: f64, text: &str) -> f64 {
    let vocab: BTreeSet<char> = corpus.iter().flat_map(|s| s.chars()).collect();
    let v = vocab.len() as f64;

    let mut next_counts: HashMap<(String, char), u64> = HashMap::new();
    let mut context_totals: HashMap<String, u64> = HashMap::new();
    for s in corpus {
        let chars: Vec<char> = s.chars().collect();
        for i in 0..chars.len() {
            for len in 0..=order.min(i) {
                let ctx: String = chars[i - len..i].iter().collect();
                *next_counts.entry((ctx.clone(), chars[i])).or_insert(0) += 1;
                *context_totals.entry(ctx).or_insert(0) += 1;
            }
        }
    }

    let chars: Vec<char> = text.chars().collect();
    let mut total = 0.0;
    for i in 0..chars.len() {
        let ctx: String = chars[i.saturating_sub(order)..i].iter().collect();
        let seen = next_counts.get(&(ctx.clone(), chars[i])).copied().unwrap_or(0) as f64;
        let ctx_total = context_totals.get(&ctx).copied().unwrap_or(0) as f64;
        total += ((seen + alpha) / (ctx_total + alpha * v)).ln();
    }
    total
}

/// Two stylistically disjoint sentence pools plus a model trained on both,
/// shaped so sentence boundaries carry the signal a character model can see.
fn style_fixture() -> (PrimingSet, TargetBatch, NGramModel) {
    let dog = |i: usize| format!("dogs {} the house.", ["guard", "love", "warm", "cheer"][i % 4]);
    let cat = |i: usize| format!("cats {} the attic.", ["watch", "haunt", "claim", "roam"][i % 4]);

    let mut corpus = Vec::new();
    for p in 0..10 {
        corpus.push((0..4).map(|j| dog(4 * p + j)).collect::<Vec<_>>().join(" "));
        corpus.push((0..4).map(|j| cat(4 * p + j)).collect::<Vec<_>>().join(" "));
    }
    let model = NGramModel::fit(&corpus, 3, 0.2).unwrap();

    let dogs: Vec<String> = (0..4).map(dog).collect();
    let cats: Vec<String> = (0..4).map(cat).collect();
    let priming = PrimingSet::from_texts("dogs", &dogs, "cats", &cats).unwrap();

    let targets = vec![
        Target { id: "t0".into(), text: dog(1) },
        Target { id: "t1".into(), text: cat(2) },
        Target { id: "t2".into(), text: dog(3) },
        Target { id: "t3".into(), text: cat(0) },
    ];
    (priming, TargetBatch::new(targets).unwrap(), model)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_sides_mirrors_every_outcome(
        rng_seed in any::<u64>(),
        k in 1..=2usize,
        repetitions in 1..=3usize,
    ) {
        let (priming, batch, model) = style_fixture();
        let plan = PairingPlan { k, repetitions, rng_seed };

        let forward = run_paired(&priming, &batch, &plan, &model).unwrap();
        let mirrored = run_paired(&priming.swapped(), &batch, &plan, &model).unwrap();

        prop_assert!(forward.failures.is_empty());
        prop_assert!(mirrored.failures.is_empty());
        prop_assert_eq!(forward.distinct_texts, mirrored.distinct_texts);
        prop_assert_eq!(forward.outcomes.len(), mirrored.outcomes.len());

        for (f, m) in forward.outcomes.iter().zip(&mirrored.outcomes) {
            prop_assert_eq!(&f.target_id, &m.target_id);
            prop_assert_eq!(f.records.len(), m.records.len());
            for (rf, rm) in f.records.iter().zip(&m.records) {
                prop_assert_eq!(rf.delta, -rm.delta);
                if rf.delta != 0.0 {
                    prop_assert_eq!(rf.delta.to_bits(), (-rm.delta).to_bits());
                }
                prop_assert_eq!(&rf.conditioner_a_id, &rm.conditioner_b_id);
                prop_assert_eq!(&rf.conditioner_b_id, &rm.conditioner_a_id);
            }
            // Aggregation sums in sorted order; mirroring reverses that
            // order, so equality here is numeric rather than bitwise.
            prop_assert!(
                (f.aggregate_delta + m.aggregate_delta).abs() <= 1e-9,
                "aggregates not mirrored: {} vs {}", f.aggregate_delta, m.aggregate_delta
            );
            prop_assert_eq!(f.tie, m.tie);
            if !f.tie && f.aggregate_delta.abs() > 1e-6 {
                prop_assert_eq!(f.label, m.label.opposite());
            }
        }
    }
}
