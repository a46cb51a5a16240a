//! Trained-classifier baselines: logistic regression over TF-IDF,
//! pooled word vectors, or provider embeddings, with the replicated
//! train/test protocol used to compare them against the paired method.

mod logistic;
mod tfidf;
mod wordvec;

pub use logistic::{
    loss_and_gradient, train, Features, LogisticModel, TrainOptions, TrainSummary,
};
pub use tfidf::{tokenize, SparseVector, TfidfVectorizer};
pub use wordvec::WordVectorTable;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evaluator::ItemOutcome;
use crate::hash::stable_hash;
use crate::logprob::FramingLabel;
use crate::provider::{LanguageModel, ProviderError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("side {side}: need at least {required} sentences ({train_half} train + {test} test), have {available}")]
    InsufficientData { side: String, required: usize, train_half: usize, test: usize, available: usize },
    #[error("training data: {0}")]
    InvalidTraining(String),
    #[error("word-vector table: {0}")]
    VectorTable(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Where feature vectors come from.
pub enum FeatureSource<'a> {
    Tfidf,
    WordVectors(&'a WordVectorTable),
    Embeddings(&'a dyn LanguageModel),
}

impl FeatureSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSource::Tfidf => "tfidf",
            FeatureSource::WordVectors(_) => "wordvec",
            FeatureSource::Embeddings(_) => "embed",
        }
    }
}

/// Sampling protocol: a fixed held-out test split per side, and `replicates`
/// independent training subsamples of `n_train` sentences total (half per
/// side) drawn from the remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPlan {
    pub n_train: usize,
    pub replicates: usize,
    pub test_per_side: usize,
    pub seed: u64,
    pub l2_lambda: f64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan { n_train: 100, replicates: 5, test_per_side: 50, seed: 0, l2_lambda: 1e-2 }
    }
}

impl TrainPlan {
    fn validate(&self) -> Result<(), BaselineError> {
        if self.n_train < 2 {
            return Err(BaselineError::InvalidTraining(format!(
                "n_train must be at least 2, got {}",
                self.n_train
            )));
        }
        if self.replicates == 0 {
            return Err(BaselineError::InvalidTraining("replicates must be at least 1".into()));
        }
        if self.test_per_side == 0 {
            return Err(BaselineError::InvalidTraining("test_per_side must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub items: Vec<ItemOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub replicates: Vec<ReplicateOutcome>,
}

impl BaselineRun {
    /// All items across replicates, for pooled confusion analysis.
    pub fn all_items(&self) -> Vec<ItemOutcome> {
        self.replicates.iter().flat_map(|r| r.items.iter().cloned()).collect()
    }
}

/// Embeds a batch, collapsing duplicate texts into a single upstream request
/// and fanning the result back out in input order.
pub fn fetch_embeddings(
    provider: &dyn LanguageModel,
    texts: &[String],
) -> Result<Vec<Vec<f64>>, ProviderError> {
    let mut unique: Vec<String> = Vec::new();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for t in texts {
        if !position.contains_key(t.as_str()) {
            position.insert(t.as_str(), unique.len());
            unique.push(t.clone());
        }
    }
    let embedded = provider.embed(&unique)?;
    Ok(texts.iter().map(|t| embedded[position[t.as_str()]].clone()).collect())
}

struct SideSplit {
    test: Vec<usize>,
    pool: Vec<usize>,
}

fn split_side(
    side_name: &str,
    len: usize,
    plan: &TrainPlan,
) -> Result<SideSplit, BaselineError> {
    let train_half = plan.n_train / 2;
    let required = plan.test_per_side + train_half;
    if len < required {
        return Err(BaselineError::InsufficientData {
            side: side_name.to_string(),
            required,
            train_half,
            test: plan.test_per_side,
            available: len,
        });
    }
    let mut indices: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[
        &plan.seed.to_le_bytes(),
        b"split",
        side_name.as_bytes(),
    ]));
    indices.shuffle(&mut rng);
    let test = indices[..plan.test_per_side].to_vec();
    let pool = indices[plan.test_per_side..].to_vec();
    Ok(SideSplit { test, pool })
}

struct ReplicateData<'a> {
    train_texts: Vec<&'a str>,
    train_labels: Vec<FramingLabel>,
    test_texts: Vec<&'a str>,
    test_meta: Vec<(String, FramingLabel)>,
}

fn predict_items<X: Features>(
    train_x: &[X],
    train_labels: &[FramingLabel],
    test_x: &[X],
    test_meta: &[(String, FramingLabel)],
    dim: usize,
    l2_lambda: f64,
) -> Result<Vec<ItemOutcome>, BaselineError> {
    let options = TrainOptions { l2_lambda, ..Default::default() };
    let model = train(train_x, train_labels, dim, &options)?;
    Ok(test_x
        .iter()
        .zip(test_meta)
        .map(|(x, (id, truth))| ItemOutcome {
            id: id.clone(),
            truth: *truth,
            predicted: Some(model.predict(x).0),
        })
        .collect())
}

/// Runs the full replicated protocol for one feature source over two labeled
/// sentence pools (side A first).
pub fn run_baseline(
    source: &FeatureSource,
    side_a: &[String],
    side_b: &[String],
    plan: &TrainPlan,
) -> Result<BaselineRun, BaselineError> {
    plan.validate()?;
    let split_a = split_side("A", side_a.len(), plan)?;
    let split_b = split_side("B", side_b.len(), plan)?;
    let train_half = plan.n_train / 2;

    let mut replicates = Vec::with_capacity(plan.replicates);
    for r in 0..plan.replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[
            &plan.seed.to_le_bytes(),
            b"replicate",
            &r.to_le_bytes(),
        ]));
        let sample = |pool: &[usize], rng: &mut ChaCha8Rng| -> Vec<usize> {
            let mut copy = pool.to_vec();
            copy.shuffle(rng);
            copy.truncate(train_half);
            copy
        };
        let train_a = sample(&split_a.pool, &mut rng);
        let train_b = sample(&split_b.pool, &mut rng);

        let mut data = ReplicateData {
            train_texts: Vec::with_capacity(2 * train_half),
            train_labels: Vec::with_capacity(2 * train_half),
            test_texts: Vec::with_capacity(2 * plan.test_per_side),
            test_meta: Vec::with_capacity(2 * plan.test_per_side),
        };
        for &i in &train_a {
            data.train_texts.push(side_a[i].as_str());
            data.train_labels.push(FramingLabel::A);
        }
        for &i in &train_b {
            data.train_texts.push(side_b[i].as_str());
            data.train_labels.push(FramingLabel::B);
        }
        for &i in &split_a.test {
            data.test_texts.push(side_a[i].as_str());
            data.test_meta.push((format!("r{r}:a{i}"), FramingLabel::A));
        }
        for &i in &split_b.test {
            data.test_texts.push(side_b[i].as_str());
            data.test_meta.push((format!("r{r}:b{i}"), FramingLabel::B));
        }

        let items = run_one_replicate(source, &data, plan.l2_lambda)?;
        replicates.push(ReplicateOutcome { replicate: r, items });
    }
    Ok(BaselineRun { replicates })
}

fn run_one_replicate(
    source: &FeatureSource,
    data: &ReplicateData,
    l2_lambda: f64,
) -> Result<Vec<ItemOutcome>, BaselineError> {
    match source {
        FeatureSource::Tfidf => {
            let train_docs: Vec<String> =
                data.train_texts.iter().map(|t| t.to_string()).collect();
            let vectorizer = TfidfVectorizer::fit(&train_docs)?;
            let train_x: Vec<SparseVector> =
                data.train_texts.iter().map(|t| vectorizer.transform(t)).collect();
            let test_x: Vec<SparseVector> =
                data.test_texts.iter().map(|t| vectorizer.transform(t)).collect();
            predict_items(
                &train_x,
                &data.train_labels,
                &test_x,
                &data.test_meta,
                vectorizer.vocab_size(),
                l2_lambda,
            )
        }
        FeatureSource::WordVectors(table) => {
            let train_x: Vec<Vec<f64>> =
                data.train_texts.iter().map(|t| table.pool(t)).collect();
            let test_x: Vec<Vec<f64>> = data.test_texts.iter().map(|t| table.pool(t)).collect();
            predict_items(
                &train_x,
                &data.train_labels,
                &test_x,
                &data.test_meta,
                table.dim(),
                l2_lambda,
            )
        }
        FeatureSource::Embeddings(provider) => {
            let mut all_texts: Vec<String> =
                data.train_texts.iter().map(|t| t.to_string()).collect();
            all_texts.extend(data.test_texts.iter().map(|t| t.to_string()));
            let mut vectors = fetch_embeddings(*provider, &all_texts)?;
            let dim = vectors.first().map(Vec::len).unwrap_or(0);
            if dim == 0 {
                return Err(BaselineError::InvalidTraining("provider returned empty embeddings".into()));
            }
            let test_x = vectors.split_off(data.train_texts.len());
            predict_items(&vectors, &data.train_labels, &test_x, &data.test_meta, dim, l2_lambda)
        }
    }
}
