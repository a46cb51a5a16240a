//! Client for OpenAI-compatible HTTP servers (the hosted API, vLLM,
//! llama.cpp's server, ...). Echo scoring goes through `/v1/completions`
//! with `max_tokens: 0, echo: true`; first-token distributions through
//! `/v1/chat/completions` with `logprobs: true`.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    cache_key, check_messages, check_temperature, check_text_non_empty, check_top_n,
    ChatMessage, FirstTokenDistribution, LanguageModel, ProviderConfig, ProviderError,
    ResponseCache, ScoredSequence, TokenLogProb, UsageMeter, UsageSnapshot,
};

const MAX_BACKOFF_MS: u64 = 30_000;

#[derive(Serialize)]
struct CompletionsRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    echo: bool,
    logprobs: u32,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logprobs: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_logprobs: Option<u32>,
    temperature: f64,
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct CompletionsResponse {
    choices: Vec<CompletionChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    logprobs: Option<EchoLogProbs>,
}

#[derive(Deserialize)]
struct EchoLogProbs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    #[serde(default)]
    message: Option<ChatReplyMessage>,
    logprobs: Option<ChatLogProbs>,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatLogProbs {
    content: Vec<ChatTokenLogProb>,
}

#[derive(Deserialize)]
struct ChatTokenLogProb {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<TopLogProb>,
}

#[derive(Deserialize)]
struct TopLogProb {
    token: String,
    logprob: f64,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

fn token_usage(usage: &Option<Usage>) -> (u64, u64) {
    usage.as_ref().map(|u| (u.prompt_tokens, u.completion_tokens)).unwrap_or((0, 0))
}

/// Parses a `/v1/completions` echo response into a scored sequence.
/// Returns the sequence plus (input, output) token counts for metering.
pub fn parse_scored_sequence(body: &str) -> Result<(ScoredSequence, u64, u64), ProviderError> {
    let resp: CompletionsResponse = serde_json::from_str(body)
        .map_err(|e| ProviderError::Protocol(format!("completions response: {e}")))?;
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::Protocol("completions response has no choices".into()))?;
    let lp = choice
        .logprobs
        .ok_or_else(|| ProviderError::Protocol("completions choice is missing logprobs".into()))?;
    if lp.tokens.len() != lp.token_logprobs.len() {
        return Err(ProviderError::Protocol(format!(
            "echo logprobs are misaligned: {} tokens vs {} logprobs",
            lp.tokens.len(),
            lp.token_logprobs.len()
        )));
    }
    let tokens: Vec<TokenLogProb> = lp
        .tokens
        .into_iter()
        .zip(lp.token_logprobs)
        .map(|(token, logprob)| TokenLogProb { token, logprob })
        .collect();
    let (input, output) = token_usage(&resp.usage);
    let input = if input == 0 { tokens.len() as u64 } else { input };
    Ok((ScoredSequence::from_tokens(tokens)?, input, output))
}

/// Parses a chat response carrying per-position top log-probabilities into a
/// first-token distribution over the earliest generated positions.
pub fn parse_chat_first_tokens(
    body: &str,
) -> Result<(FirstTokenDistribution, u64, u64), ProviderError> {
    let resp: ChatResponse = serde_json::from_str(body)
        .map_err(|e| ProviderError::Protocol(format!("chat response: {e}")))?;
    let (input, output) = token_usage(&resp.usage);
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ProviderError::Protocol("chat response has no choices".into()))?;
    let lp = choice
        .logprobs
        .ok_or_else(|| ProviderError::Protocol("chat choice is missing logprobs".into()))?;
    if lp.content.len() < 2 {
        return Err(ProviderError::Protocol(format!(
            "need log-probabilities for at least 2 generated positions, got {}",
            lp.content.len()
        )));
    }
    let mut positions = Vec::with_capacity(lp.content.len());
    for pos in &lp.content {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        map.insert(pos.token.clone(), pos.logprob.min(0.0));
        for alt in &pos.top_logprobs {
            map.entry(alt.token.clone()).or_insert(alt.logprob.min(0.0));
        }
        positions.push(map);
    }
    Ok((FirstTokenDistribution::new(positions)?, input, output))
}

/// Extracts the assistant reply text from a chat response.
pub fn parse_chat_text(body: &str) -> Result<(String, u64, u64), ProviderError> {
    let resp: ChatResponse = serde_json::from_str(body)
        .map_err(|e| ProviderError::Protocol(format!("chat response: {e}")))?;
    let (input, output) = token_usage(&resp.usage);
    let text = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message)
        .and_then(|m| m.content)
        .ok_or_else(|| ProviderError::Protocol("chat response has no message content".into()))?;
    Ok((text, input, output))
}

/// Parses an embeddings response into vectors ordered by their `index`.
pub fn parse_embeddings(body: &str) -> Result<(Vec<Vec<f64>>, u64, u64), ProviderError> {
    let resp: EmbeddingsResponse = serde_json::from_str(body)
        .map_err(|e| ProviderError::Protocol(format!("embeddings response: {e}")))?;
    let (input, output) = token_usage(&resp.usage);
    let mut data = resp.data;
    data.sort_by_key(|d| d.index);
    Ok((data.into_iter().map(|d| d.embedding).collect(), input, output))
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { permits: Mutex::new(permits), available: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.permits.lock().unwrap() += 1;
        self.gate.available.notify_one();
    }
}

/// Blocking client for an OpenAI-compatible server.
pub struct OpenAiCompatible {
    config: ProviderConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
    cache: Option<ResponseCache>,
    gate: Gate,
    meter: UsageMeter,
}

impl OpenAiCompatible {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Config(format!(
                    "environment variable `{var}` is not set (API key for model `{}`)",
                    config.model_name
                ))
            })?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build()
            .map_err(|e| ProviderError::Config(format!("http client: {e}")))?;
        let cache = match &config.cache_path {
            Some(path) => Some(ResponseCache::open(path)?),
            None => None,
        };
        let gate = Gate::new(config.max_parallel);
        Ok(OpenAiCompatible { config, api_key, http, cache, gate, meter: UsageMeter::default() })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        let base = self.config.endpoint_url.trim_end_matches('/');
        match base.strip_suffix("/v1") {
            Some(root) => format!("{root}{path}"),
            None => format!("{base}{path}"),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.retry.base_backoff_ms.saturating_mul(1u64 << attempt.min(16));
        let jitter = rand::rng().random_range(0.5..1.5);
        Duration::from_millis(((base as f64 * jitter) as u64).min(MAX_BACKOFF_MS))
    }

    fn post_with_retry(&self, url: &str, body: &str) -> Result<String, ProviderError> {
        let _permit = self.gate.acquire();
        let max_attempts = self.config.retry.max_attempts.max(1);
        let mut last_failure = String::new();
        for attempt in 0..max_attempts {
            if attempt > 0 {
                self.meter.record_retry();
                std::thread::sleep(self.backoff(attempt - 1));
            }
            let mut req = self
                .http
                .post(url)
                .header("content-type", "application/json")
                .body(body.to_string());
            if let Some(key) = &self.api_key {
                req = req.header("authorization", format!("Bearer {key}"));
            }
            match req.send() {
                Err(e) => last_failure = format!("transport: {e}"),
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.text().map_err(|e| ProviderError::Transport {
                            attempts: attempt + 1,
                            message: format!("reading body: {e}"),
                        });
                    }
                    let text = resp.text().unwrap_or_default();
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_failure = format!("status {status}: {}", text.trim());
                    } else {
                        return Err(ProviderError::Rejected {
                            status: status.as_u16(),
                            message: text.trim().to_string(),
                        });
                    }
                }
            }
        }
        Err(ProviderError::Transport { attempts: max_attempts, message: last_failure })
    }

    /// Fetches a response through the cache. Returns the body plus whether
    /// it was served locally (cache hits are free: no meter movement).
    fn request(&self, path: &str, body: String) -> Result<(String, bool), ProviderError> {
        let url = self.url(path);
        let key = cache_key(&url, &self.config.model_name, &body);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                return Ok((hit, true));
            }
        }
        let response = self.post_with_retry(&url, &body)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &response);
        }
        Ok((response, false))
    }
}

impl LanguageModel for OpenAiCompatible {
    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn max_parallel(&self) -> usize {
        self.config.max_parallel
    }

    fn score_text(&self, text: &str) -> Result<ScoredSequence, ProviderError> {
        check_text_non_empty(text)?;
        let body = serde_json::to_string(&CompletionsRequest {
            model: &self.config.model_name,
            prompt: text,
            max_tokens: 0,
            echo: true,
            logprobs: 0,
        })
        .expect("request serializes");
        let (response, cached) = self.request("/v1/completions", body)?;
        let (seq, input, output) = parse_scored_sequence(&response)?;
        if !cached {
            self.meter.record_request(input, output);
        }
        Ok(seq)
    }

    fn first_token_logprobs(
        &self,
        messages: &[ChatMessage],
        top_n: usize,
    ) -> Result<FirstTokenDistribution, ProviderError> {
        check_messages(messages)?;
        check_top_n(top_n)?;
        let body = serde_json::to_string(&ChatRequest {
            model: &self.config.model_name,
            messages,
            max_tokens: Some(2),
            logprobs: Some(true),
            top_logprobs: Some(top_n as u32),
            temperature: 0.0,
        })
        .expect("request serializes");
        let (response, cached) = self.request("/v1/chat/completions", body)?;
        let (dist, input, output) = parse_chat_first_tokens(&response)?;
        if !cached {
            self.meter.record_request(input, output);
        }
        Ok(dist)
    }

    fn generate(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, ProviderError> {
        check_messages(messages)?;
        check_temperature(temperature)?;
        let body = serde_json::to_string(&ChatRequest {
            model: &self.config.model_name,
            messages,
            max_tokens: None,
            logprobs: None,
            top_logprobs: None,
            temperature,
        })
        .expect("request serializes");
        let (response, cached) = self.request("/v1/chat/completions", body)?;
        let (text, input, output) = parse_chat_text(&response)?;
        if !cached {
            self.meter.record_request(input, output);
        }
        Ok(text)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::InvalidRequest("no texts to embed".into()));
        }
        let body = serde_json::to_string(&EmbeddingsRequest {
            model: &self.config.model_name,
            input: texts,
        })
        .expect("request serializes");
        let (response, cached) = self.request("/v1/embeddings", body)?;
        let (vectors, input, output) = parse_embeddings(&response)?;
        if vectors.len() != texts.len() {
            return Err(ProviderError::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        if let Some(first) = vectors.first() {
            if first.is_empty() || vectors.iter().any(|v| v.len() != first.len()) {
                return Err(ProviderError::Protocol("embedding dimensions disagree".into()));
            }
        }
        if !cached {
            self.meter.record_request(input, output);
        }
        Ok(vectors)
    }

    fn usage(&self) -> UsageSnapshot {
        self.meter.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(endpoint: &str) -> ProviderConfig {
        ProviderConfig {
            endpoint_url: endpoint.into(),
            model_name: "test-model".into(),
            api_key_env: None,
            max_parallel: 2,
            retry: super::super::RetryPolicy { max_attempts: 1, base_backoff_ms: 1 },
            price_per_1k_input: 0.0,
            price_per_1k_output: 0.0,
            request_timeout_ms: 5_000,
            cache_path: None,
        }
    }

    #[test]
    fn url_joining_tolerates_v1_suffix() {
        let plain = OpenAiCompatible::new(config("http://h:1234")).unwrap();
        assert_eq!(plain.url("/v1/completions"), "http://h:1234/v1/completions");
        let with_v1 = OpenAiCompatible::new(config("http://h:1234/v1/")).unwrap();
        assert_eq!(with_v1.url("/v1/completions"), "http://h:1234/v1/completions");
    }

    #[test]
    fn missing_api_key_env_names_the_variable() {
        let mut cfg = config("http://h");
        cfg.api_key_env = Some("FRAMEALIGN_TEST_KEY_THAT_IS_NOT_SET".into());
        let err = match OpenAiCompatible::new(cfg) {
            Err(e) => e,
            Ok(_) => panic!("expected a configuration error"),
        };
        assert!(err.to_string().contains("FRAMEALIGN_TEST_KEY_THAT_IS_NOT_SET"));
    }

    #[test]
    fn misaligned_echo_arrays_are_a_protocol_error() {
        let body = r#"{"choices":[{"logprobs":{"tokens":["a","b"],"token_logprobs":[null]}}]}"#;
        assert!(matches!(parse_scored_sequence(body), Err(ProviderError::Protocol(_))));
    }

    #[test]
    fn missing_logprobs_is_a_protocol_error() {
        let body = r#"{"choices":[{"text":"hi"}]}"#;
        assert!(matches!(parse_scored_sequence(body), Err(ProviderError::Protocol(_))));
    }

    #[test]
    fn single_position_chat_logprobs_are_rejected() {
        let body = r#"{"choices":[{"logprobs":{"content":[
            {"token":"x","logprob":-0.5,"top_logprobs":[{"token":"x","logprob":-0.5}]}
        ]}}]}"#;
        assert!(matches!(parse_chat_first_tokens(body), Err(ProviderError::Protocol(_))));
    }

    #[test]
    fn embeddings_come_back_in_index_order() {
        let body = r#"{"data":[
            {"index":1,"embedding":[3.0,4.0]},
            {"index":0,"embedding":[1.0,2.0]}
        ],"usage":{"prompt_tokens":7,"completion_tokens":0}}"#;
        let (vectors, input, _) = parse_embeddings(body).unwrap();
        assert_eq!(vectors, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(input, 7);
    }
}
