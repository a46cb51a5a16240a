//! Shared fixtures for the benchmarks: a deterministic two-style corpus and
//! the pieces of a paired run built from it. Everything here is pure
//! construction so benchmark timings measure the library, not the setup.

use framealign::{
    Conditioner, FramingLabel, ItemOutcome, NGramModel, PrimingSet, Target, TargetBatch,
};

/// Paragraphs in two disjoint sentence styles. Each paragraph chains four
/// same-style sentences so a character model learns the cross-sentence
/// transitions the paired engine conditions on.
pub fn style_paragraphs(per_side: usize) -> Vec<String> {
    let mut paragraphs = Vec::with_capacity(per_side * 2);
    for p in 0..per_side {
        paragraphs.push((0..4).map(|j| dog_sentence(4 * p + j)).collect::<Vec<_>>().join(" "));
        paragraphs.push((0..4).map(|j| cat_sentence(4 * p + j)).collect::<Vec<_>>().join(" "));
    }
    paragraphs
}

pub fn dog_sentence(i: usize) -> String {
    format!("dogs {} the house.", ["guard", "love", "warm", "cheer"][i % 4])
}

pub fn cat_sentence(i: usize) -> String {
    format!("cats {} the attic.", ["watch", "haunt", "claim", "roam"][i % 4])
}

pub fn style_model() -> NGramModel {
    NGramModel::fit(&style_paragraphs(10), 3, 0.2).expect("fixture corpus fits")
}

pub fn style_priming() -> PrimingSet {
    let side = |prefix: &str, make: fn(usize) -> String| -> Vec<Conditioner> {
        (0..4)
            .map(|i| Conditioner { id: format!("{prefix}{i}"), text: make(i) })
            .collect()
    };
    PrimingSet::new("dogs", "cats", side("a", dog_sentence), side("b", cat_sentence))
        .expect("fixture priming is valid")
}

pub fn style_targets(per_side: usize) -> TargetBatch {
    let mut targets = Vec::with_capacity(per_side * 2);
    for i in 0..per_side {
        targets.push(Target { id: format!("d{i}"), text: dog_sentence(i + 1) });
        targets.push(Target { id: format!("c{i}"), text: cat_sentence(i + 1) });
    }
    TargetBatch::new(targets).expect("fixture targets are valid")
}

/// Sentence pools for the trained baselines: distinct vocabulary per side,
/// enough variety that TF-IDF has real features to weigh.
pub fn baseline_pools(per_side: usize) -> (Vec<String>, Vec<String>) {
    let a = (0..per_side)
        .map(|i| format!("dogs {} the house near post {i}.", ["guard", "love", "warm", "cheer"][i % 4]))
        .collect();
    let b = (0..per_side)
        .map(|i| format!("cats {} the attic above beam {i}.", ["watch", "haunt", "claim", "roam"][i % 4]))
        .collect();
    (a, b)
}

/// A deterministic mixed-quality outcome vector for bootstrap resampling.
pub fn synthetic_outcomes(n: usize) -> Vec<ItemOutcome> {
    (0..n)
        .map(|i| {
            let truth = if i % 2 == 0 { FramingLabel::A } else { FramingLabel::B };
            let predicted = if i % 7 == 3 { truth.opposite() } else { truth };
            ItemOutcome { id: format!("i{i}"), truth, predicted: Some(predicted) }
        })
        .collect()
}
