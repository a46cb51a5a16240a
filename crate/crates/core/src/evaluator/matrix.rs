//! The experiment grid: every combination of method family, model, topic,
//! and variant becomes one cell, and each cell is evaluated to an F1 with a
//! confidence interval, an asymmetry estimate, and a token-cost ledger.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{
    bias_with_ci, bootstrap_f1_ci, f1, replicate_ci, BiasEstimate, BootstrapParams,
    ConfusionMatrix, ItemOutcome, MetricWithCi,
};
use crate::baselines::{run_baseline, FeatureSource, TrainPlan, WordVectorTable};
use crate::engine::{
    estimate_calls, run_paired, PairingPlan, PrimingSet, Target, TargetBatch,
    DEFAULT_TOKEN_INFLATION,
};
use crate::hash::stable_hash;
use crate::logprob::FramingLabel;
use crate::prompt::{
    classify_by_prompt, resolve_label_tokens, PromptError, PromptInputs, PromptOutcome,
    PromptTemplate, PromptVariant, DEFAULT_TOP_N,
};
use crate::provider::{LanguageModel, ProviderError, UsageSnapshot};
use crate::synthgen::{FramingCorpus, FramingSide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodFamily {
    Tfidf,
    WordVec,
    Embed,
    Paired,
    Prompt,
}

impl MethodFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodFamily::Tfidf => "tfidf",
            MethodFamily::WordVec => "wordvec",
            MethodFamily::Embed => "embed",
            MethodFamily::Paired => "paired",
            MethodFamily::Prompt => "prompt",
        }
    }

    /// Logistic-regression families share the train-size variant axis.
    pub fn is_trained(&self) -> bool {
        matches!(self, MethodFamily::Tfidf | MethodFamily::WordVec | MethodFamily::Embed)
    }
}

impl std::fmt::Display for MethodFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MethodFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tfidf" => Ok(MethodFamily::Tfidf),
            "wordvec" => Ok(MethodFamily::WordVec),
            "embed" => Ok(MethodFamily::Embed),
            "paired" => Ok(MethodFamily::Paired),
            "prompt" => Ok(MethodFamily::Prompt),
            other => Err(format!("unknown method family `{other}`")),
        }
    }
}

/// One experiment: a method run with one model on one topic under one
/// variant setting (`n=<size>`, `k=<1|2>`, or a prompt variant name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellSpec {
    pub method: MethodFamily,
    pub model: String,
    pub topic: String,
    pub variant: String,
}

impl CellSpec {
    pub fn key(&self) -> String {
        format!("{}/{}/{}/{}", self.method, self.model, self.topic, self.variant)
    }

    pub fn train_size(&self) -> Option<usize> {
        self.variant.strip_prefix("n=").and_then(|v| v.parse().ok())
    }

    pub fn pairing_k(&self) -> Option<usize> {
        self.variant.strip_prefix("k=").and_then(|v| v.parse().ok())
    }

    pub fn prompt_variant(&self) -> Option<PromptVariant> {
        self.variant.parse().ok()
    }

    /// The variant string must fit the method family's axis.
    pub fn validate(&self) -> Result<(), String> {
        if self.model.trim().is_empty() || self.topic.trim().is_empty() {
            return Err(format!("cell {} has an empty model or topic", self.key()));
        }
        let ok = match self.method {
            m if m.is_trained() => self.train_size().is_some_and(|n| n >= 2),
            MethodFamily::Paired => self.pairing_k().is_some_and(|k| k == 1 || k == 2),
            _ => self.prompt_variant().is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "cell {} has variant `{}`, which does not fit method `{}`",
                self.key(),
                self.variant,
                self.method
            ))
        }
    }
}

/// Which models and variant settings to sweep. `enumerate_cells` expands
/// this into the full cartesian product per method family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPlan {
    pub topics: Vec<String>,
    pub train_sizes: Vec<usize>,
    pub tfidf_models: Vec<String>,
    pub wordvec_models: Vec<String>,
    pub embed_models: Vec<String>,
    pub paired_models: Vec<String>,
    pub prompt_models: Vec<String>,
    pub ks: Vec<usize>,
    pub prompt_variants: Vec<PromptVariant>,
}

impl MatrixPlan {
    /// The standard grid shape: six training sizes, both pairing depths, and
    /// all four prompt variants for every listed model and topic.
    pub fn standard(
        topics: Vec<String>,
        embed_models: Vec<String>,
        paired_models: Vec<String>,
        prompt_models: Vec<String>,
    ) -> Self {
        MatrixPlan {
            topics,
            train_sizes: vec![10, 20, 50, 100, 200, 500],
            tfidf_models: vec!["tfidf".into()],
            wordvec_models: vec!["wordvec".into()],
            embed_models,
            paired_models,
            prompt_models,
            ks: vec![1, 2],
            prompt_variants: PromptVariant::ALL.to_vec(),
        }
    }
}

/// Expands a plan into sorted, validated cells.
pub fn enumerate_cells(plan: &MatrixPlan) -> Result<Vec<CellSpec>, String> {
    let mut cells = Vec::new();
    let mut push = |method: MethodFamily, models: &[String], variants: &[String]| {
        for model in models {
            for topic in &plan.topics {
                for variant in variants {
                    cells.push(CellSpec {
                        method,
                        model: model.clone(),
                        topic: topic.clone(),
                        variant: variant.clone(),
                    });
                }
            }
        }
    };
    let sizes: Vec<String> = plan.train_sizes.iter().map(|n| format!("n={n}")).collect();
    let ks: Vec<String> = plan.ks.iter().map(|k| format!("k={k}")).collect();
    let prompts: Vec<String> =
        plan.prompt_variants.iter().map(|v| v.as_str().to_string()).collect();
    push(MethodFamily::Tfidf, &plan.tfidf_models, &sizes);
    push(MethodFamily::WordVec, &plan.wordvec_models, &sizes);
    push(MethodFamily::Embed, &plan.embed_models, &sizes);
    push(MethodFamily::Paired, &plan.paired_models, &ks);
    push(MethodFamily::Prompt, &plan.prompt_models, &prompts);

    for cell in &cells {
        cell.validate()?;
    }
    cells.sort();
    for pair in cells.windows(2) {
        if pair[0] == pair[1] {
            return Err(format!("duplicate cell {}", pair[0].key()));
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrices {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

impl Default for ModelPrices {
    fn default() -> Self {
        ModelPrices { input_per_1k: 0.0, output_per_1k: 0.0 }
    }
}

/// Providers and their prices, keyed by the model name cells refer to.
#[derive(Default)]
pub struct ModelSet {
    entries: BTreeMap<String, (Box<dyn LanguageModel>, ModelPrices)>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        provider: Box<dyn LanguageModel>,
        prices: ModelPrices,
    ) {
        self.entries.insert(name.into(), (provider, prices));
    }

    pub fn get(&self, name: &str) -> Option<(&dyn LanguageModel, ModelPrices)> {
        self.entries.get(name).map(|(p, prices)| (p.as_ref(), *prices))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// Token and currency accounting for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub calls: u64,
    pub retries: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost: f64,
}

impl CostLedger {
    pub fn from_usage(usage: &UsageSnapshot, prices: ModelPrices) -> Self {
        CostLedger {
            calls: usage.requests,
            retries: usage.retries,
            input_tokens: usage.input_tokens,
            output_tokens: usage.output_tokens,
            cost: token_cost(usage.input_tokens, usage.output_tokens, prices),
        }
    }
}

pub fn token_cost(input_tokens: u64, output_tokens: u64, prices: ModelPrices) -> f64 {
    input_tokens as f64 / 1000.0 * prices.input_per_1k
        + output_tokens as f64 / 1000.0 * prices.output_per_1k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    /// Training replicates for the logistic-regression families.
    pub lr_replicates: usize,
    /// Held-out test sentences per side for the trained families.
    pub test_per_side: usize,
    /// Cap on targets drawn from each side for paired and prompt cells.
    pub targets_per_side: Option<usize>,
    /// Independent pairing draws per target (paired cells).
    pub repetitions: usize,
    pub bootstrap_replicates: usize,
    pub bootstrap_samples: usize,
    pub l2_lambda: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            lr_replicates: 5,
            test_per_side: 50,
            targets_per_side: None,
            repetitions: 1,
            bootstrap_replicates: 100,
            bootstrap_samples: 1000,
            l2_lambda: 1e-2,
        }
    }
}

pub struct MatrixContext<'a> {
    /// Corpora keyed by the topic string cells refer to.
    pub corpora: &'a BTreeMap<String, FramingCorpus>,
    pub models: &'a ModelSet,
    pub word_vectors: Option<&'a WordVectorTable>,
    pub options: RunOptions,
}

/// Everything measured for one cell. `error` is set (and the metrics left
/// empty) when the cell could not run; the matrix keeps going either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub spec: CellSpec,
    pub label_a: String,
    pub label_b: String,
    pub f1_a: Option<MetricWithCi>,
    pub f1_b: Option<MetricWithCi>,
    pub bias: Option<BiasEstimate>,
    pub failures: u64,
    pub items: Vec<ItemOutcome>,
    pub ledger: CostLedger,
    pub error: Option<String>,
}

impl CellResult {
    pub fn key(&self) -> String {
        self.spec.key()
    }

    fn empty(spec: &CellSpec, error: String) -> Self {
        CellResult {
            spec: spec.clone(),
            label_a: String::new(),
            label_b: String::new(),
            f1_a: None,
            f1_b: None,
            bias: None,
            failures: 0,
            items: Vec::new(),
            ledger: CostLedger::default(),
            error: Some(error),
        }
    }
}

fn cell_seed(global_seed: u64, spec: &CellSpec, stream: &str) -> u64 {
    stable_hash(&[&global_seed.to_le_bytes(), spec.key().as_bytes(), stream.as_bytes()])
}

fn truth_of(id: &str) -> FramingLabel {
    // Item ids carry the side as `a`/`b` after the optional replicate prefix.
    let tail = id.rsplit(':').next().unwrap_or(id);
    if tail.starts_with('a') {
        FramingLabel::A
    } else {
        FramingLabel::B
    }
}

fn side_targets(side: &FramingSide, prefix: &str, cap: Option<usize>) -> Vec<Target> {
    let take = cap.unwrap_or(side.sentences.len()).min(side.sentences.len());
    side.sentences[..take]
        .iter()
        .enumerate()
        .map(|(i, text)| Target { id: format!("{prefix}{i}"), text: text.clone() })
        .collect()
}

/// A provider error that no retry or different target can fix.
fn is_systemic(err: &ProviderError) -> bool {
    matches!(
        err,
        ProviderError::Capability { .. }
            | ProviderError::Config(_)
            | ProviderError::InvalidRequest(_)
    )
}

struct CellMetrics {
    f1_a: Option<MetricWithCi>,
    f1_b: Option<MetricWithCi>,
    bias: Option<BiasEstimate>,
    failures: u64,
}

/// F1 per class via item bootstrap, plus the asymmetry estimate. Used by the
/// paired and prompt families, where items are single classifications.
fn bootstrap_metrics(
    items: &[ItemOutcome],
    spec: &CellSpec,
    options: &RunOptions,
) -> CellMetrics {
    let cm = ConfusionMatrix::from_outcomes(items);
    let params_for = |stream: &str| BootstrapParams {
        replicates: options.bootstrap_replicates,
        sample_size: options.bootstrap_samples,
        seed: cell_seed(options.seed, spec, stream),
    };
    CellMetrics {
        f1_a: bootstrap_f1_ci(items, FramingLabel::A, &params_for("f1_a")).ok(),
        f1_b: bootstrap_f1_ci(items, FramingLabel::B, &params_for("f1_b")).ok(),
        bias: bias_with_ci(&cm, &params_for("bias")).ok(),
        failures: cm.failures[0] + cm.failures[1],
    }
}

/// F1 per class from per-replicate scores, plus asymmetry over the pooled
/// items. Used by the trained families.
fn replicate_metrics(
    replicate_items: &[Vec<ItemOutcome>],
    pooled: &[ItemOutcome],
    spec: &CellSpec,
    options: &RunOptions,
) -> CellMetrics {
    let scores = |positive: FramingLabel| -> Vec<f64> {
        replicate_items
            .iter()
            .filter_map(|items| f1(&ConfusionMatrix::from_outcomes(items), positive))
            .collect()
    };
    let cm = ConfusionMatrix::from_outcomes(pooled);
    let bias_params = BootstrapParams {
        replicates: options.bootstrap_replicates,
        sample_size: options.bootstrap_samples,
        seed: cell_seed(options.seed, spec, "bias"),
    };
    CellMetrics {
        f1_a: replicate_ci(&scores(FramingLabel::A)).ok(),
        f1_b: replicate_ci(&scores(FramingLabel::B)).ok(),
        bias: bias_with_ci(&cm, &bias_params).ok(),
        failures: cm.failures[0] + cm.failures[1],
    }
}

fn run_trained_cell(
    spec: &CellSpec,
    ctx: &MatrixContext,
    corpus: &FramingCorpus,
) -> Result<CellResult, String> {
    let n_train = spec.train_size().ok_or_else(|| format!("bad variant `{}`", spec.variant))?;
    let plan = TrainPlan {
        n_train,
        replicates: ctx.options.lr_replicates,
        test_per_side: ctx.options.test_per_side,
        seed: cell_seed(ctx.options.seed, spec, "split"),
        l2_lambda: ctx.options.l2_lambda,
    };
    let [side_a, side_b] = &corpus.sides;

    let mut usage_before = None;
    let mut prices = ModelPrices::default();
    let source = match spec.method {
        MethodFamily::Tfidf => FeatureSource::Tfidf,
        MethodFamily::WordVec => {
            let table = ctx.word_vectors.ok_or("no word-vector table configured")?;
            FeatureSource::WordVectors(table)
        }
        MethodFamily::Embed => {
            let (provider, p) = ctx
                .models
                .get(&spec.model)
                .ok_or_else(|| format!("model `{}` is not configured", spec.model))?;
            prices = p;
            usage_before = Some(provider.usage());
            FeatureSource::Embeddings(provider)
        }
        other => return Err(format!("method `{other}` is not a trained family")),
    };

    let run = run_baseline(&source, &side_a.sentences, &side_b.sentences, &plan)
        .map_err(|e| e.to_string())?;
    let ledger = match (&source, usage_before) {
        (FeatureSource::Embeddings(provider), Some(before)) => {
            CostLedger::from_usage(&provider.usage().since(&before), prices)
        }
        _ => CostLedger::default(),
    };

    let replicate_items: Vec<Vec<ItemOutcome>> =
        run.replicates.iter().map(|r| r.items.clone()).collect();
    let pooled = run.all_items();
    let metrics = replicate_metrics(&replicate_items, &pooled, spec, &ctx.options);
    Ok(CellResult {
        spec: spec.clone(),
        label_a: side_a.label.clone(),
        label_b: side_b.label.clone(),
        f1_a: metrics.f1_a,
        f1_b: metrics.f1_b,
        bias: metrics.bias,
        failures: metrics.failures,
        items: pooled,
        ledger,
        error: None,
    })
}

fn run_paired_cell(
    spec: &CellSpec,
    ctx: &MatrixContext,
    corpus: &FramingCorpus,
) -> Result<CellResult, String> {
    let k = spec.pairing_k().ok_or_else(|| format!("bad variant `{}`", spec.variant))?;
    let (provider, prices) = ctx
        .models
        .get(&spec.model)
        .ok_or_else(|| format!("model `{}` is not configured", spec.model))?;
    let [side_a, side_b] = &corpus.sides;
    let priming = PrimingSet::from_texts(
        side_a.label.clone(),
        &side_a.distilled,
        side_b.label.clone(),
        &side_b.distilled,
    )
    .map_err(|e| e.to_string())?;
    let mut targets = side_targets(side_a, "a", ctx.options.targets_per_side);
    targets.extend(side_targets(side_b, "b", ctx.options.targets_per_side));
    let batch = TargetBatch::new(targets).map_err(|e| e.to_string())?;
    let plan = PairingPlan {
        k,
        repetitions: ctx.options.repetitions,
        rng_seed: cell_seed(ctx.options.seed, spec, "pairing"),
    };

    let before = provider.usage();
    let outcome = run_paired(&priming, &batch, &plan, provider).map_err(|e| e.to_string())?;
    let ledger = CostLedger::from_usage(&provider.usage().since(&before), prices);

    let mut predicted: BTreeMap<&str, Option<FramingLabel>> = BTreeMap::new();
    for o in &outcome.outcomes {
        predicted.insert(o.target_id.as_str(), Some(o.label));
    }
    for fail in &outcome.failures {
        predicted.insert(fail.target_id.as_str(), None);
    }
    let items: Vec<ItemOutcome> = batch
        .targets
        .iter()
        .map(|t| ItemOutcome {
            id: t.id.clone(),
            truth: truth_of(&t.id),
            predicted: predicted.get(t.id.as_str()).copied().flatten(),
        })
        .collect();

    let metrics = bootstrap_metrics(&items, spec, &ctx.options);
    Ok(CellResult {
        spec: spec.clone(),
        label_a: side_a.label.clone(),
        label_b: side_b.label.clone(),
        f1_a: metrics.f1_a,
        f1_b: metrics.f1_b,
        bias: metrics.bias,
        failures: metrics.failures,
        items,
        ledger,
        error: None,
    })
}

/// Context text shown to the model for each prompt variant.
pub fn prompt_context(side: &FramingSide, variant: PromptVariant) -> String {
    match variant {
        PromptVariant::Seeds => side.seeds.join("\n"),
        PromptVariant::Distilled => side.distilled.join("\n"),
        PromptVariant::Summary => side.summary.clone(),
        PromptVariant::ZeroShot => String::new(),
    }
}

fn run_prompt_cell(
    spec: &CellSpec,
    ctx: &MatrixContext,
    corpus: &FramingCorpus,
) -> Result<CellResult, String> {
    let variant =
        spec.prompt_variant().ok_or_else(|| format!("bad variant `{}`", spec.variant))?;
    let (provider, prices) = ctx
        .models
        .get(&spec.model)
        .ok_or_else(|| format!("model `{}` is not configured", spec.model))?;
    let [side_a, side_b] = &corpus.sides;
    let template = PromptTemplate::builtin(variant);
    let context_a = prompt_context(side_a, variant);
    let context_b = prompt_context(side_b, variant);

    let before = provider.usage();
    let tokens = resolve_label_tokens(provider, &side_a.label, &side_b.label)
        .map_err(|e| e.to_string())?;

    let mut targets = side_targets(side_a, "a", ctx.options.targets_per_side);
    targets.extend(side_targets(side_b, "b", ctx.options.targets_per_side));
    let mut items = Vec::with_capacity(targets.len());
    for target in &targets {
        let inputs = PromptInputs {
            label_a: &side_a.label,
            label_b: &side_b.label,
            context_a: &context_a,
            context_b: &context_b,
            target: &target.text,
        };
        let predicted =
            match classify_by_prompt(provider, &template, &inputs, &tokens, DEFAULT_TOP_N) {
                Ok(PromptOutcome::Decided(decision)) => Some(decision.label),
                Ok(PromptOutcome::Failed(_)) => None,
                Err(PromptError::Provider(e)) if !is_systemic(&e) => None,
                Err(e) => return Err(e.to_string()),
            };
        items.push(ItemOutcome { id: target.id.clone(), truth: truth_of(&target.id), predicted });
    }
    let ledger = CostLedger::from_usage(&provider.usage().since(&before), prices);

    let metrics = bootstrap_metrics(&items, spec, &ctx.options);
    Ok(CellResult {
        spec: spec.clone(),
        label_a: side_a.label.clone(),
        label_b: side_b.label.clone(),
        f1_a: metrics.f1_a,
        f1_b: metrics.f1_b,
        bias: metrics.bias,
        failures: metrics.failures,
        items,
        ledger,
        error: None,
    })
}

/// Recomputes every derived number in a result from its raw items; a
/// mismatch means an accounting bug, reported as the cell error.
pub fn double_entry_check(result: &CellResult) -> Result<(), String> {
    let cm = ConfusionMatrix::from_outcomes(&result.items);
    if result.error.is_none() && cm.failures[0] + cm.failures[1] != result.failures {
        return Err(format!(
            "failure count {} disagrees with items ({})",
            result.failures,
            cm.failures[0] + cm.failures[1]
        ));
    }
    if let Some(f1_a) = &result.f1_a {
        let recomputed = match f1_a.method {
            super::CiMethod::Bootstrap => f1(&cm, FramingLabel::A),
            super::CiMethod::Replicate => {
                let mut groups: BTreeMap<&str, Vec<ItemOutcome>> = BTreeMap::new();
                for item in &result.items {
                    let rep = item.id.split(':').next().unwrap_or("");
                    groups.entry(rep).or_default().push(item.clone());
                }
                let scores: Vec<f64> = groups
                    .values()
                    .filter_map(|items| {
                        f1(&ConfusionMatrix::from_outcomes(items), FramingLabel::A)
                    })
                    .collect();
                replicate_ci(&scores).ok().map(|ci| ci.point)
            }
        };
        match recomputed {
            Some(point) if (point - f1_a.point).abs() <= 1e-12 => {}
            other => {
                return Err(format!(
                    "F1(A) {} disagrees with recomputation {other:?}",
                    f1_a.point
                ))
            }
        }
    }
    Ok(())
}

/// Evaluates one cell, never panicking the matrix: any failure is recorded
/// in the result's `error` field.
pub fn run_cell(spec: &CellSpec, ctx: &MatrixContext) -> CellResult {
    if let Err(e) = spec.validate() {
        return CellResult::empty(spec, e);
    }
    let Some(corpus) = ctx.corpora.get(&spec.topic) else {
        return CellResult::empty(spec, format!("no corpus for topic `{}`", spec.topic));
    };
    let outcome = match spec.method {
        m if m.is_trained() => run_trained_cell(spec, ctx, corpus),
        MethodFamily::Paired => run_paired_cell(spec, ctx, corpus),
        _ => run_prompt_cell(spec, ctx, corpus),
    };
    let mut result = match outcome {
        Ok(result) => result,
        Err(e) => return CellResult::empty(spec, e),
    };
    if let Err(e) = double_entry_check(&result) {
        result.error = Some(e);
    }
    result
}

/// Runs cells in spec order. Each provider already fans its requests out to
/// its own parallelism limit; running cells sequentially on top of that
/// keeps per-cell usage deltas (and thus ledgers) exact.
pub fn run_matrix(
    cells: &[CellSpec],
    ctx: &MatrixContext,
    mut on_cell: impl FnMut(&CellResult),
) -> Vec<CellResult> {
    let mut results: Vec<CellResult> = cells
        .iter()
        .map(|spec| {
            let result = run_cell(spec, ctx);
            on_cell(&result);
            result
        })
        .collect();
    results.sort_by(|x, y| x.spec.cmp(&y.spec));
    results
}

fn estimate_tokens(words: usize) -> u64 {
    (words as f64 * DEFAULT_TOKEN_INFLATION).ceil() as u64
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Predicts a cell's ledger without touching any provider. Trained-feature
/// cells that never call out cost nothing; embedding, paired, and prompt
/// cells are priced from the texts the run would submit.
pub fn estimate_cell_cost(
    spec: &CellSpec,
    corpora: &BTreeMap<String, FramingCorpus>,
    options: &RunOptions,
    prices: &BTreeMap<String, ModelPrices>,
) -> Result<CostLedger, String> {
    spec.validate()?;
    let corpus =
        corpora.get(&spec.topic).ok_or_else(|| format!("no corpus for topic `{}`", spec.topic))?;
    let [side_a, side_b] = &corpus.sides;
    let model_prices = || {
        prices
            .get(&spec.model)
            .copied()
            .ok_or_else(|| format!("no prices configured for model `{}`", spec.model))
    };
    match spec.method {
        MethodFamily::Tfidf | MethodFamily::WordVec => Ok(CostLedger::default()),
        MethodFamily::Embed => {
            let n_train = spec.train_size().unwrap_or(0);
            let half = n_train / 2;
            // Each replicate embeds its train sample plus the shared test
            // split in one call; the train sample is seed-dependent, so the
            // estimate prices the mean sentence length instead of the draw.
            let mean_words = |side: &FramingSide| {
                let total: usize = side.sentences.iter().map(|s| word_count(s)).sum();
                total as f64 / side.sentences.len().max(1) as f64
            };
            let per_replicate = (half as f64 + options.test_per_side as f64)
                * (mean_words(side_a) + mean_words(side_b));
            let words = (per_replicate * options.lr_replicates as f64).ceil() as usize;
            let input_tokens = estimate_tokens(words);
            let prices = model_prices()?;
            Ok(CostLedger {
                calls: options.lr_replicates as u64,
                retries: 0,
                input_tokens,
                output_tokens: 0,
                cost: token_cost(input_tokens, 0, prices),
            })
        }
        MethodFamily::Paired => {
            let k = spec.pairing_k().unwrap_or(1);
            let priming = PrimingSet::from_texts(
                side_a.label.clone(),
                &side_a.distilled,
                side_b.label.clone(),
                &side_b.distilled,
            )
            .map_err(|e| e.to_string())?;
            let mut targets = side_targets(side_a, "a", options.targets_per_side);
            targets.extend(side_targets(side_b, "b", options.targets_per_side));
            let batch = TargetBatch::new(targets).map_err(|e| e.to_string())?;
            let plan = PairingPlan {
                k,
                repetitions: options.repetitions,
                rng_seed: cell_seed(options.seed, spec, "pairing"),
            };
            let estimate = estimate_calls(&priming, &batch, &plan).map_err(|e| e.to_string())?;
            let prices = model_prices()?;
            Ok(CostLedger {
                calls: estimate.provider_calls as u64,
                retries: 0,
                input_tokens: estimate.estimated_tokens,
                output_tokens: 0,
                cost: token_cost(estimate.estimated_tokens, 0, prices),
            })
        }
        MethodFamily::Prompt => {
            let variant = spec.prompt_variant().unwrap();
            let template = PromptTemplate::builtin(variant);
            let context_a = prompt_context(side_a, variant);
            let context_b = prompt_context(side_b, variant);
            let mut targets = side_targets(side_a, "a", options.targets_per_side);
            targets.extend(side_targets(side_b, "b", options.targets_per_side));
            let mut words = word_count(&side_a.label) + word_count(&side_b.label);
            for target in &targets {
                let inputs = PromptInputs {
                    label_a: &side_a.label,
                    label_b: &side_b.label,
                    context_a: &context_a,
                    context_b: &context_b,
                    target: &target.text,
                };
                let messages = template.render(&inputs).map_err(|e| e.to_string())?;
                words += messages.iter().map(|m| word_count(&m.content)).sum::<usize>();
            }
            let input_tokens = estimate_tokens(words);
            // Two label-tokenization calls plus one chat call per target,
            // each chat call capped at two output tokens.
            let calls = 2 + targets.len() as u64;
            let output_tokens = 2 * targets.len() as u64;
            let prices = model_prices()?;
            Ok(CostLedger {
                calls,
                retries: 0,
                input_tokens,
                output_tokens,
                cost: token_cost(input_tokens, output_tokens, prices),
            })
        }
    }
}
