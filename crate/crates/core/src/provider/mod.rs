//! Language-model access: a blocking trait over the handful of operations
//! the toolkit needs (echo scoring, first-token distributions, generation,
//! embeddings), plus usage metering shared by every implementation.
//!
//! Implementations: [`OpenAiCompatible`] for remote HTTP servers,
//! [`NGramModel`] for a local character model, [`ScriptedProvider`] for
//! replaying canned replies, and [`StubProvider`] for deterministic offline
//! dry-runs.

mod cache;
mod ngram;
mod openai;
mod scripted;
mod stub;

pub use cache::{cache_key, ResponseCache};
pub use ngram::NGramModel;
pub use openai::{
    parse_chat_first_tokens, parse_chat_text, parse_embeddings, parse_scored_sequence,
    OpenAiCompatible,
};
pub use scripted::{ScriptedCall, ScriptedProvider};
pub use stub::StubProvider;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logprob::LogProbTotal;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider `{model}` does not support {operation}")]
    Capability { model: String, operation: &'static str },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider rejected request (status {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("character {ch:?} is outside the model vocabulary")]
    OutOfVocabulary { ch: char },
}

impl ProviderError {
    /// True when retrying the same request later could plausibly succeed.
    /// Capability and configuration errors are never retriable.
    pub fn is_retriable(&self) -> bool {
        matches!(self, ProviderError::Transport { .. })
    }
}

/// Chat roles for the handful of conversational endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
}

/// One scored token: its text and the log-probability assigned to it given
/// everything before it. The first token of a sequence has no conditioning
/// context, so its log-probability is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProb {
    pub token: String,
    pub logprob: Option<f64>,
}

/// A text scored token-by-token. `text` is the concatenation of the token
/// texts and `total` the sum of the present per-token log-probabilities, both
/// enforced at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub text: String,
    pub tokens: Vec<TokenLogProb>,
    pub total: LogProbTotal,
}

impl ScoredSequence {
    pub fn from_tokens(tokens: Vec<TokenLogProb>) -> Result<Self, ProviderError> {
        if tokens.is_empty() {
            return Err(ProviderError::Protocol("scored sequence has no tokens".into()));
        }
        let mut text = String::new();
        let mut total = 0.0;
        for t in &tokens {
            text.push_str(&t.token);
            if let Some(lp) = t.logprob {
                if !lp.is_finite() {
                    return Err(ProviderError::Protocol(format!(
                        "non-finite token log-probability {lp} for token {:?}",
                        t.token
                    )));
                }
                total += lp;
            }
        }
        let total = LogProbTotal::new(total)
            .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        Ok(ScoredSequence { text, tokens, total })
    }
}

/// Alternative-token log-probabilities for the first generated positions of
/// a chat completion. Position 0 is the first generated token. Maps are
/// ordered so iteration is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstTokenDistribution {
    pub positions: Vec<BTreeMap<String, f64>>,
}

impl FirstTokenDistribution {
    pub fn new(positions: Vec<BTreeMap<String, f64>>) -> Result<Self, ProviderError> {
        if positions.len() < 2 {
            return Err(ProviderError::Protocol(format!(
                "first-token distribution needs at least 2 positions, got {}",
                positions.len()
            )));
        }
        for (i, pos) in positions.iter().enumerate() {
            if pos.is_empty() {
                return Err(ProviderError::Protocol(format!(
                    "first-token distribution has no candidates at position {i}"
                )));
            }
            for (token, lp) in pos {
                if !lp.is_finite() || *lp > 0.0 {
                    return Err(ProviderError::Protocol(format!(
                        "invalid log-probability {lp} for token {token:?} at position {i}"
                    )));
                }
            }
        }
        Ok(FirstTokenDistribution { positions })
    }

    /// Finds `token` at the earliest position that contains it.
    pub fn lookup(&self, token: &str) -> Option<(usize, f64)> {
        self.positions
            .iter()
            .enumerate()
            .find_map(|(i, pos)| pos.get(token).map(|lp| (i, *lp)))
    }

    /// Smallest log-probability reported at position 0: an upper bound on
    /// the score of any token that did not make the reported list.
    pub fn floor(&self) -> Option<f64> {
        self.positions
            .first()
            .and_then(|pos| pos.values().copied().min_by(f64::total_cmp))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_backoff_ms: 500 }
    }
}

/// Connection settings for a remote provider. The API key itself never lives
/// here — only the name of the environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub price_per_1k_input: f64,
    #[serde(default)]
    pub price_per_1k_output: f64,
    #[serde(default = "default_timeout_ms")]
    pub request_timeout_ms: u64,
    #[serde(default)]
    pub cache_path: Option<std::path::PathBuf>,
}

fn default_max_parallel() -> usize {
    4
}

fn default_timeout_ms() -> u64 {
    120_000
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.endpoint_url.is_empty() {
            return Err(ProviderError::Config("endpoint_url is empty".into()));
        }
        if self.model_name.is_empty() {
            return Err(ProviderError::Config("model_name is empty".into()));
        }
        if self.max_parallel == 0 {
            return Err(ProviderError::Config("max_parallel must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(ProviderError::Config("retry.max_attempts must be at least 1".into()));
        }
        if self.price_per_1k_input < 0.0 || self.price_per_1k_output < 0.0 {
            return Err(ProviderError::Config("prices must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cumulative request accounting. Cheap to share: all counters are atomic.
#[derive(Debug, Default)]
pub struct UsageMeter {
    requests: AtomicU64,
    retries: AtomicU64,
    input_tokens: AtomicU64,
    output_tokens: AtomicU64,
}

impl UsageMeter {
    pub fn record_request(&self, input_tokens: u64, output_tokens: u64) {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.input_tokens.fetch_add(input_tokens, Ordering::Relaxed);
        self.output_tokens.fetch_add(output_tokens, Ordering::Relaxed);
    }

    pub fn record_retry(&self) {
        self.retries.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> UsageSnapshot {
        UsageSnapshot {
            requests: self.requests.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            input_tokens: self.input_tokens.load(Ordering::Relaxed),
            output_tokens: self.output_tokens.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSnapshot {
    pub requests: u64,
    pub retries: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl UsageSnapshot {
    /// Usage accrued since `earlier` was taken.
    pub fn since(&self, earlier: &UsageSnapshot) -> UsageSnapshot {
        UsageSnapshot {
            requests: self.requests - earlier.requests,
            retries: self.retries - earlier.retries,
            input_tokens: self.input_tokens - earlier.input_tokens,
            output_tokens: self.output_tokens - earlier.output_tokens,
        }
    }
}

/// The operations a model backend can offer. Backends implement what they
/// support; the defaults report a capability error so callers get a clear
/// diagnostic instead of a panic when they pick the wrong backend for a job.
pub trait LanguageModel: Send + Sync {
    fn model_name(&self) -> &str;

    /// How many requests the backend is happy to have in flight at once.
    fn max_parallel(&self) -> usize {
        1
    }

    /// Scores `text` as-is and returns per-token log-probabilities.
    fn score_text(&self, _text: &str) -> Result<ScoredSequence, ProviderError> {
        Err(self.capability_error("echo scoring"))
    }

    /// Top-alternative log-probabilities for the first generated positions
    /// (at least two) of a chat reply to `messages`.
    fn first_token_logprobs(
        &self,
        _messages: &[ChatMessage],
        _top_n: usize,
    ) -> Result<FirstTokenDistribution, ProviderError> {
        Err(self.capability_error("first-token log-probabilities"))
    }

    /// Free-form chat completion.
    fn generate(&self, _messages: &[ChatMessage], _temperature: f64) -> Result<String, ProviderError> {
        Err(self.capability_error("text generation"))
    }

    /// Dense embeddings, one per input text, in input order.
    fn embed(&self, _texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Err(self.capability_error("embeddings"))
    }

    fn usage(&self) -> UsageSnapshot;

    fn capability_error(&self, operation: &'static str) -> ProviderError {
        ProviderError::Capability { model: self.model_name().to_string(), operation }
    }
}

pub(crate) fn check_text_non_empty(text: &str) -> Result<(), ProviderError> {
    if text.is_empty() {
        return Err(ProviderError::InvalidRequest("text to score is empty".into()));
    }
    Ok(())
}

pub(crate) fn check_top_n(top_n: usize) -> Result<(), ProviderError> {
    if top_n < 5 {
        return Err(ProviderError::InvalidRequest(format!(
            "top_n must be at least 5, got {top_n}"
        )));
    }
    Ok(())
}

pub(crate) fn check_temperature(temperature: f64) -> Result<(), ProviderError> {
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(ProviderError::InvalidRequest(format!(
            "temperature must be finite and non-negative, got {temperature}"
        )));
    }
    Ok(())
}

pub(crate) fn check_messages(messages: &[ChatMessage]) -> Result<(), ProviderError> {
    if messages.is_empty() {
        return Err(ProviderError::InvalidRequest("message list is empty".into()));
    }
    Ok(())
}

/// Scores every text, fanning out over at most `max_parallel()` worker
/// threads. Results come back in input order; each text's failure is its own
/// entry rather than poisoning the batch.
pub fn score_many(
    provider: &dyn LanguageModel,
    texts: &[String],
) -> Vec<Result<ScoredSequence, ProviderError>> {
    let workers = provider.max_parallel().max(1).min(texts.len());
    if workers <= 1 {
        return texts.iter().map(|t| provider.score_text(t)).collect();
    }
    let next = AtomicU64::new(0);
    let slots: Vec<Mutex<Option<Result<ScoredSequence, ProviderError>>>> =
        texts.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed) as usize;
                if i >= texts.len() {
                    break;
                }
                let result = provider.score_text(&texts[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}
