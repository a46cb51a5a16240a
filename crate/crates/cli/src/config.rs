//! Declarative run configuration: a single TOML file describing providers,
//! datasets, and the method grid. Everything is validated up front so a
//! misconfigured matrix fails before the first token is spent.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use framealign::{
    enumerate_cells, CellSpec, FramingCorpus, LanguageModel, MatrixPlan, MethodFamily,
    ModelPrices, ModelSet, NGramModel, OpenAiCompatible, PromptVariant, ProviderConfig,
    RetryPolicy, RunOptions, ScriptedProvider, StubProvider, SynthError, WordVectorTable,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("dataset {path}: {source}")]
    Dataset {
        path: String,
        #[source]
        source: SynthError,
    },
    #[error("provider `{name}`: {source}")]
    Provider {
        name: String,
        #[source]
        source: framealign::ProviderError,
    },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// The whole run description. Paths are resolved relative to the config
/// file's directory so a config can be checked in next to its data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub datasets: Vec<PathBuf>,
    #[serde(default)]
    pub word_vectors: Option<PathBuf>,
    #[serde(default)]
    pub options: OptionOverrides,
    #[serde(default)]
    pub providers: Vec<ProviderEntry>,
    #[serde(default)]
    pub methods: Vec<MethodEntry>,
}

/// Optional knobs layered over the evaluator defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionOverrides {
    pub lr_replicates: Option<usize>,
    pub test_per_side: Option<usize>,
    pub targets_per_side: Option<usize>,
    pub repetitions: Option<usize>,
    pub bootstrap_replicates: Option<usize>,
    pub bootstrap_samples: Option<usize>,
    pub l2_lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Ngram,
    Openai,
    Scripted,
    Stub,
}

impl ProviderKind {
    fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Ngram => "ngram",
            ProviderKind::Openai => "openai",
            ProviderKind::Scripted => "scripted",
            ProviderKind::Stub => "stub",
        }
    }
}

/// One model backend. The set fields must match the kind; anything else is
/// rejected so typos cannot silently fall back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderEntry {
    pub name: String,
    pub kind: ProviderKind,

    // ngram
    pub order: Option<usize>,
    pub alpha: Option<f64>,
    /// Consecutive same-side sentences joined into one training passage.
    /// A character model only learns that a dog-flavoured ending precedes a
    /// dog-flavoured opener if its training text crosses sentence
    /// boundaries, and that transition is exactly what conditioning on a
    /// priming prefix exercises.
    pub passage_len: Option<usize>,
    /// Extra training text files, one document per line. The n-gram model
    /// always trains on the configured datasets' sentences as well.
    pub train: Option<Vec<PathBuf>>,

    // openai-compatible
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    pub api_key_env: Option<String>,
    pub max_parallel: Option<usize>,
    pub retry_max_attempts: Option<u32>,
    pub retry_base_backoff_ms: Option<u64>,
    pub request_timeout_ms: Option<u64>,
    pub cache_path: Option<PathBuf>,

    // scripted
    pub replies: Option<PathBuf>,

    // accounting (any kind)
    pub price_per_1k_input: Option<f64>,
    pub price_per_1k_output: Option<f64>,
}

impl ProviderEntry {
    /// Names of the optional fields that are set, paired with which kinds
    /// accept them. `None` in the kind list means "any kind".
    fn set_fields(&self) -> Vec<(&'static str, &'static [ProviderKind])> {
        const NGRAM: &[ProviderKind] = &[ProviderKind::Ngram];
        const OPENAI: &[ProviderKind] = &[ProviderKind::Openai];
        const SCRIPTED: &[ProviderKind] = &[ProviderKind::Scripted];
        const ANY: &[ProviderKind] = &[];
        let mut set = Vec::new();
        let mut push = |present: bool, field: &'static str, kinds: &'static [ProviderKind]| {
            if present {
                set.push((field, kinds));
            }
        };
        push(self.order.is_some(), "order", NGRAM);
        push(self.alpha.is_some(), "alpha", NGRAM);
        push(self.passage_len.is_some(), "passage_len", NGRAM);
        push(self.train.is_some(), "train", NGRAM);
        push(self.endpoint_url.is_some(), "endpoint_url", OPENAI);
        push(self.model_name.is_some(), "model_name", OPENAI);
        push(self.api_key_env.is_some(), "api_key_env", OPENAI);
        push(self.max_parallel.is_some(), "max_parallel", OPENAI);
        push(self.retry_max_attempts.is_some(), "retry_max_attempts", OPENAI);
        push(self.retry_base_backoff_ms.is_some(), "retry_base_backoff_ms", OPENAI);
        push(self.request_timeout_ms.is_some(), "request_timeout_ms", OPENAI);
        push(self.cache_path.is_some(), "cache_path", OPENAI);
        push(self.replies.is_some(), "replies", SCRIPTED);
        push(self.price_per_1k_input.is_some(), "price_per_1k_input", ANY);
        push(self.price_per_1k_output.is_some(), "price_per_1k_output", ANY);
        set
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("provider name must not be empty"));
        }
        for (field, kinds) in self.set_fields() {
            if !kinds.is_empty() && !kinds.contains(&self.kind) {
                return Err(invalid(format!(
                    "provider `{}`: field `{field}` does not apply to kind `{}`",
                    self.name,
                    self.kind.as_str()
                )));
            }
        }
        match self.kind {
            ProviderKind::Openai => {
                for (field, value) in
                    [("endpoint_url", &self.endpoint_url), ("model_name", &self.model_name)]
                {
                    if value.is_none() {
                        return Err(invalid(format!(
                            "provider `{}`: kind `openai` requires `{field}`",
                            self.name
                        )));
                    }
                }
            }
            ProviderKind::Scripted => {
                if self.replies.is_none() {
                    return Err(invalid(format!(
                        "provider `{}`: kind `scripted` requires `replies`",
                        self.name
                    )));
                }
            }
            ProviderKind::Ngram | ProviderKind::Stub => {}
        }
        Ok(())
    }

    pub fn prices(&self) -> ModelPrices {
        ModelPrices {
            input_per_1k: self.price_per_1k_input.unwrap_or(0.0),
            output_per_1k: self.price_per_1k_output.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub family: String,
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub train_sizes: Vec<usize>,
    #[serde(default)]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub variants: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let body = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        reject_embedded_secrets(&body, path)?;
        let mut config: RunConfig = toml::from_str(&body).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source: Box::new(source),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    /// Re-anchors every relative path on the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut self.output_dir);
        self.datasets.iter_mut().for_each(&anchor);
        if let Some(p) = self.word_vectors.as_mut() {
            anchor(p);
        }
        for provider in &mut self.providers {
            if let Some(files) = provider.train.as_mut() {
                files.iter_mut().for_each(&anchor);
            }
            if let Some(p) = provider.cache_path.as_mut() {
                anchor(p);
            }
            if let Some(p) = provider.replies.as_mut() {
                anchor(p);
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut names = BTreeSet::new();
        for provider in &self.providers {
            provider.validate()?;
            if !names.insert(provider.name.as_str()) {
                return Err(invalid(format!("duplicate provider name `{}`", provider.name)));
            }
        }
        for entry in &self.methods {
            let family = MethodFamily::from_str(&entry.family)
                .map_err(|e| invalid(format!("methods: {e}")))?;
            self.validate_method(family, entry)?;
        }
        for dataset in &self.datasets {
            if !dataset.exists() {
                return Err(invalid(format!("dataset file not found: {}", dataset.display())));
            }
        }
        if let Some(path) = &self.word_vectors {
            if !path.exists() {
                return Err(invalid(format!("word vector file not found: {}", path.display())));
            }
        }
        Ok(())
    }

    fn validate_method(&self, family: MethodFamily, entry: &MethodEntry) -> Result<(), ConfigError> {
        let provider_backed = matches!(
            family,
            MethodFamily::Embed | MethodFamily::Paired | MethodFamily::Prompt
        );
        if provider_backed {
            if entry.models.is_empty() {
                return Err(invalid(format!(
                    "method `{}` needs at least one provider in `models`",
                    family.as_str()
                )));
            }
            for model in &entry.models {
                if !self.providers.iter().any(|p| &p.name == model) {
                    return Err(invalid(format!(
                        "method `{}` refers to unknown provider `{model}`",
                        family.as_str()
                    )));
                }
            }
        }
        match family {
            MethodFamily::Tfidf | MethodFamily::WordVec | MethodFamily::Embed => {
                if entry.train_sizes.is_empty() {
                    return Err(invalid(format!(
                        "method `{}` needs `train_sizes`",
                        family.as_str()
                    )));
                }
                if !entry.ks.is_empty() || !entry.variants.is_empty() {
                    return Err(invalid(format!(
                        "method `{}` takes only `train_sizes` as its variant axis",
                        family.as_str()
                    )));
                }
                if family == MethodFamily::WordVec && self.word_vectors.is_none() {
                    return Err(invalid("method `wordvec` needs a top-level `word_vectors` file"));
                }
            }
            MethodFamily::Paired => {
                if entry.ks.is_empty() {
                    return Err(invalid("method `paired` needs `ks` (completions per side)"));
                }
                if !entry.train_sizes.is_empty() || !entry.variants.is_empty() {
                    return Err(invalid("method `paired` takes only `ks` as its variant axis"));
                }
            }
            MethodFamily::Prompt => {
                if entry.variants.is_empty() {
                    return Err(invalid("method `prompt` needs `variants`"));
                }
                for v in &entry.variants {
                    PromptVariant::from_str(v).map_err(|e| invalid(format!("prompt: {e}")))?;
                }
                if !entry.train_sizes.is_empty() || !entry.ks.is_empty() {
                    return Err(invalid("method `prompt` takes only `variants` as its axis"));
                }
            }
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        let defaults = RunOptions::default();
        let o = &self.options;
        RunOptions {
            seed: self.seed,
            lr_replicates: o.lr_replicates.unwrap_or(defaults.lr_replicates),
            test_per_side: o.test_per_side.unwrap_or(defaults.test_per_side),
            targets_per_side: o.targets_per_side.or(defaults.targets_per_side),
            repetitions: o.repetitions.unwrap_or(defaults.repetitions),
            bootstrap_replicates: o.bootstrap_replicates.unwrap_or(defaults.bootstrap_replicates),
            bootstrap_samples: o.bootstrap_samples.unwrap_or(defaults.bootstrap_samples),
            l2_lambda: o.l2_lambda.unwrap_or(defaults.l2_lambda),
        }
    }

    /// Loads every dataset, keyed by topic. Duplicate topics are rejected:
    /// cells name corpora by topic alone.
    pub fn load_corpora(&self) -> Result<BTreeMap<String, FramingCorpus>, ConfigError> {
        let mut corpora = BTreeMap::new();
        for path in &self.datasets {
            let corpus = FramingCorpus::load(path).map_err(|source| ConfigError::Dataset {
                path: path.display().to_string(),
                source,
            })?;
            if let Some(previous) = corpora.insert(corpus.topic.clone(), corpus) {
                return Err(invalid(format!(
                    "two datasets share the topic `{}`",
                    previous.topic
                )));
            }
        }
        Ok(corpora)
    }

    pub fn load_word_vectors(&self) -> Result<Option<WordVectorTable>, ConfigError> {
        match &self.word_vectors {
            None => Ok(None),
            Some(path) => WordVectorTable::load(path)
                .map(Some)
                .map_err(|e| invalid(format!("word vectors {}: {e}", path.display()))),
        }
    }

    pub fn find_provider(&self, name: &str) -> Result<&ProviderEntry, ConfigError> {
        self.providers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| invalid(format!("no provider named `{name}` in the config")))
    }

    /// Instantiates one provider. This is the only place a network-capable
    /// backend is constructed, and the only place an API key is resolved.
    pub fn build_provider(
        &self,
        entry: &ProviderEntry,
        corpora: &BTreeMap<String, FramingCorpus>,
    ) -> Result<Box<dyn LanguageModel>, ConfigError> {
        let named = |source| ConfigError::Provider { name: entry.name.clone(), source };
        match entry.kind {
            ProviderKind::Ngram => {
                let passage_len = entry.passage_len.unwrap_or(4).max(1);
                let mut docs: Vec<String> = Vec::new();
                for corpus in corpora.values() {
                    for side in &corpus.sides {
                        for chunk in side.sentences.chunks(passage_len) {
                            docs.push(chunk.join(" "));
                        }
                        // The distilled claims become conditioning prefixes at
                        // scoring time, so the model has to know their
                        // characters and endings too.
                        for chunk in side.distilled.chunks(passage_len) {
                            docs.push(chunk.join(" "));
                        }
                    }
                }
                for path in entry.train.iter().flatten() {
                    let body = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                    docs.extend(body.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
                }
                let model = NGramModel::fit(&docs, entry.order.unwrap_or(3), entry.alpha.unwrap_or(0.2))
                    .map_err(named)?;
                Ok(Box::new(model.with_name(entry.name.clone())))
            }
            ProviderKind::Openai => {
                let config = ProviderConfig {
                    endpoint_url: entry.endpoint_url.clone().expect("validated"),
                    model_name: entry.model_name.clone().expect("validated"),
                    api_key_env: entry.api_key_env.clone(),
                    max_parallel: entry.max_parallel.unwrap_or(4),
                    retry: RetryPolicy {
                        max_attempts: entry.retry_max_attempts.unwrap_or(RetryPolicy::default().max_attempts),
                        base_backoff_ms: entry
                            .retry_base_backoff_ms
                            .unwrap_or(RetryPolicy::default().base_backoff_ms),
                    },
                    price_per_1k_input: entry.price_per_1k_input.unwrap_or(0.0),
                    price_per_1k_output: entry.price_per_1k_output.unwrap_or(0.0),
                    request_timeout_ms: entry.request_timeout_ms.unwrap_or(120_000),
                    cache_path: entry.cache_path.clone(),
                };
                Ok(Box::new(OpenAiCompatible::new(config).map_err(named)?))
            }
            ProviderKind::Scripted => {
                let path = entry.replies.as_ref().expect("validated");
                let provider = ScriptedProvider::from_file(path).map_err(named)?;
                Ok(Box::new(provider.with_name(entry.name.clone())))
            }
            ProviderKind::Stub => Ok(Box::new(StubProvider::default())),
        }
    }

    /// Builds every provider a method refers to, plus its price sheet.
    pub fn build_model_set(
        &self,
        corpora: &BTreeMap<String, FramingCorpus>,
    ) -> Result<(ModelSet, BTreeMap<String, ModelPrices>), ConfigError> {
        let referenced: BTreeSet<&String> =
            self.methods.iter().flat_map(|m| m.models.iter()).collect();
        let mut models = ModelSet::new();
        let mut prices = BTreeMap::new();
        for entry in &self.providers {
            prices.insert(entry.name.clone(), entry.prices());
            if referenced.contains(&entry.name) {
                models.insert(entry.name.clone(), self.build_provider(entry, corpora)?, entry.prices());
            }
        }
        Ok((models, prices))
    }

    /// Expands the method entries into the full sorted cell grid.
    pub fn cells(&self, topics: &[String]) -> Result<Vec<CellSpec>, ConfigError> {
        if self.methods.is_empty() {
            return Err(invalid("config lists no methods to run"));
        }
        if topics.is_empty() {
            return Err(invalid("config lists no datasets"));
        }
        let mut cells: Vec<CellSpec> = Vec::new();
        for entry in &self.methods {
            let family = MethodFamily::from_str(&entry.family).expect("validated");
            let mut plan = MatrixPlan {
                topics: topics.to_vec(),
                train_sizes: entry.train_sizes.clone(),
                tfidf_models: Vec::new(),
                wordvec_models: Vec::new(),
                embed_models: Vec::new(),
                paired_models: Vec::new(),
                prompt_models: Vec::new(),
                ks: entry.ks.clone(),
                prompt_variants: entry
                    .variants
                    .iter()
                    .map(|v| PromptVariant::from_str(v).expect("validated"))
                    .collect(),
            };
            match family {
                MethodFamily::Tfidf => {
                    plan.tfidf_models = default_models(&entry.models, "tfidf");
                }
                MethodFamily::WordVec => {
                    plan.wordvec_models = default_models(&entry.models, "wordvec");
                }
                MethodFamily::Embed => plan.embed_models = entry.models.clone(),
                MethodFamily::Paired => plan.paired_models = entry.models.clone(),
                MethodFamily::Prompt => plan.prompt_models = entry.models.clone(),
            }
            cells.extend(enumerate_cells(&plan).map_err(invalid)?);
        }
        cells.sort();
        for pair in cells.windows(2) {
            if pair[0] == pair[1] {
                return Err(invalid(format!(
                    "cell `{}` is configured twice across method entries",
                    pair[0].key()
                )));
            }
        }
        Ok(cells)
    }
}

/// Trained, provider-free methods default their model label to the family
/// name: there is no backend to select, only a column to print.
fn default_models(models: &[String], fallback: &str) -> Vec<String> {
    if models.is_empty() {
        vec![fallback.to_string()]
    } else {
        models.to_vec()
    }
}

/// Refuses any config that tries to carry a credential. Keys stay in the
/// environment; the config may only name the variable that holds one.
fn reject_embedded_secrets(body: &str, path: &Path) -> Result<(), ConfigError> {
    let table: toml::Table = match toml::from_str(body) {
        Ok(v) => v,
        // Leave syntax errors for the typed parse, which reports them better.
        Err(_) => return Ok(()),
    };
    let value = toml::Value::Table(table);
    let mut stack = vec![&value];
    while let Some(node) = stack.pop() {
        match node {
            toml::Value::Table(table) => {
                for (key, child) in table {
                    let lowered = key.to_ascii_lowercase();
                    if lowered == "api_key" || lowered == "secret" || lowered == "token" {
                        return Err(invalid(format!(
                            "{}: `{key}` must not appear in a config file; secrets are read only \
                             from the environment — name the variable with `api_key_env`",
                            path.display()
                        )));
                    }
                    stack.push(child);
                }
            }
            toml::Value::Array(items) => stack.extend(items.iter()),
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, body).unwrap();
        path
    }

    fn minimal(dir: &Path) -> String {
        format!(
            r#"
output_dir = "out"
datasets = ["{}"]

[[providers]]
name = "mock"
kind = "ngram"

[[methods]]
family = "paired"
models = ["mock"]
ks = [1]
"#,
            dir.join("pets.json").display()
        )
    }

    fn write_corpus(dir: &Path) {
        let corpus = sample_corpus("pets");
        corpus.save(&dir.join("pets.json")).unwrap();
    }

    fn sample_corpus(topic: &str) -> FramingCorpus {
        let side = |label: &str, word: &str| framealign::FramingSide {
            label: label.to_string(),
            seeds: (0..3).map(|i| format!("{word} seed {i}")).collect(),
            distilled: (0..5).map(|i| format!("{word} point {i}")).collect(),
            summary: format!("all about {word}"),
            sentences: (0..25).map(|i| format!("{word} sentence number {i}.")).collect(),
        };
        FramingCorpus {
            topic: topic.to_string(),
            meta: framealign::GenerationMeta {
                model_name: "fixture".into(),
                temperature: 0.5,
                seed_prompts_hash: "0".into(),
                timestamp: 0,
            },
            sides: [side("dog life", "dog"), side("cat life", "cat")],
        }
    }

    #[test]
    fn loads_a_minimal_config_and_expands_cells() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let path = write_config(dir.path(), &minimal(dir.path()));
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.output_dir, dir.path().join("out"));

        let corpora = config.load_corpora().unwrap();
        let topics: Vec<String> = corpora.keys().cloned().collect();
        let cells = config.cells(&topics).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].key(), "paired/mock/pets/k=1");
    }

    #[test]
    fn embedded_secrets_are_rejected_with_guidance() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"
output_dir = "out"

[[providers]]
name = "gpt"
kind = "openai"
endpoint_url = "https://example.test/v1"
model_name = "m"
api_key = "sk-oops"
"#;
        let path = write_config(dir.path(), body);
        let err = RunConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("api_key_env"), "unhelpful message: {msg}");
        assert!(!msg.contains("sk-oops"), "message must not echo the secret: {msg}");
    }

    #[test]
    fn kind_specific_fields_are_policed() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"
output_dir = "out"

[[providers]]
name = "mock"
kind = "ngram"
endpoint_url = "https://example.test"
"#;
        let path = write_config(dir.path(), body);
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("`endpoint_url` does not apply to kind `ngram`"), "{err}");
    }

    #[test]
    fn unknown_provider_reference_is_caught_before_running() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let body = minimal(dir.path()).replace("models = [\"mock\"]", "models = [\"ghost\"]");
        let path = write_config(dir.path(), &body);
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("unknown provider `ghost`"), "{err}");
    }

    #[test]
    fn variant_axes_must_match_the_family() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let body = minimal(dir.path()).replace("ks = [1]", "ks = [1]\ntrain_sizes = [10]");
        let path = write_config(dir.path(), &body);
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("only `ks`"), "{err}");
    }

    #[test]
    fn duplicate_cells_across_method_entries_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let mut body = minimal(dir.path());
        body.push_str("\n[[methods]]\nfamily = \"paired\"\nmodels = [\"mock\"]\nks = [1, 2]\n");
        let path = write_config(dir.path(), &body);
        let config = RunConfig::load(&path).unwrap();
        let err = config.cells(&["pets".to_string()]).unwrap_err().to_string();
        assert!(err.contains("configured twice"), "{err}");
    }

    #[test]
    fn ngram_provider_trains_on_dataset_sentences() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let path = write_config(dir.path(), &minimal(dir.path()));
        let config = RunConfig::load(&path).unwrap();
        let corpora = config.load_corpora().unwrap();
        let provider = config.build_provider(&config.providers[0], &corpora).unwrap();
        // Vocabulary comes from the corpus, so corpus text scores cleanly.
        assert!(provider.score_text("dog sentence number 1.").is_ok());
        assert_eq!(provider.model_name(), "mock");
    }

    #[test]
    fn options_overrides_land_in_run_options() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let mut body = format!("seed = 41\n{}", minimal(dir.path()));
        body.push_str("\n[options]\ntest_per_side = 7\nl2_lambda = 0.5\n");
        let path = write_config(dir.path(), &body);
        let config = RunConfig::load(&path).unwrap();
        let options = config.run_options();
        assert_eq!(options.seed, 41);
        assert_eq!(options.test_per_side, 7);
        assert_eq!(options.l2_lambda, 0.5);
        assert_eq!(options.repetitions, RunOptions::default().repetitions);
    }
}
