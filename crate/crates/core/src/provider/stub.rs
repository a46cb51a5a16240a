//! Deterministic offline stand-in for a real model. Every operation derives
//! its numbers from a stable hash of its input, so full pipeline dry-runs
//! produce identical bytes on every machine and every rerun — useful for
//! shaking out experiment plumbing before spending money on a live endpoint.

use std::collections::BTreeMap;

use crate::hash::{stable_hash, unit};

use super::{
    check_messages, check_temperature, check_text_non_empty, check_top_n, ChatMessage,
    FirstTokenDistribution, LanguageModel, ProviderError, ScoredSequence, TokenLogProb,
    UsageMeter, UsageSnapshot,
};

pub struct StubProvider {
    name: String,
    meter: UsageMeter,
}

impl StubProvider {
    pub fn new(name: impl Into<String>) -> Self {
        StubProvider { name: name.into(), meter: UsageMeter::default() }
    }
}

impl Default for StubProvider {
    fn default() -> Self {
        StubProvider::new("stub")
    }
}

fn ws_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl LanguageModel for StubProvider {
    fn model_name(&self) -> &str {
        &self.name
    }

    fn max_parallel(&self) -> usize {
        4
    }

    fn score_text(&self, text: &str) -> Result<ScoredSequence, ProviderError> {
        check_text_non_empty(text)?;
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::with_capacity(chars.len());
        for (i, ch) in chars.iter().enumerate() {
            let h = stable_hash(&[text.as_bytes(), &i.to_le_bytes()]);
            tokens.push(TokenLogProb {
                token: ch.to_string(),
                logprob: Some(-0.5 - 2.5 * unit(h)),
            });
        }
        self.meter.record_request(chars.len() as u64, 0);
        ScoredSequence::from_tokens(tokens)
    }

    fn first_token_logprobs(
        &self,
        messages: &[ChatMessage],
        top_n: usize,
    ) -> Result<FirstTokenDistribution, ProviderError> {
        check_messages(messages)?;
        check_top_n(top_n)?;
        let prompt = messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        // Candidate first tokens: the initial character of each word in the
        // prompt, which guarantees any answer word mentioned in the prompt
        // has its leading token present in the distribution.
        let mut positions = Vec::with_capacity(2);
        for salt in 0u8..2 {
            let mut map = BTreeMap::new();
            for word in prompt.split_whitespace() {
                let first: String = word.chars().take(1).collect();
                if first.is_empty() || !first.chars().all(char::is_alphanumeric) {
                    continue;
                }
                let first = first.to_lowercase();
                let h = stable_hash(&[prompt.as_bytes(), first.as_bytes(), &[salt]]);
                map.entry(first).or_insert(-0.1 - 4.0 * unit(h));
                if map.len() >= top_n {
                    break;
                }
            }
            if map.is_empty() {
                map.insert("a".to_string(), -1.0);
            }
            positions.push(map);
        }
        self.meter.record_request(messages.iter().map(|m| ws_tokens(&m.content)).sum(), 2);
        FirstTokenDistribution::new(positions)
    }

    fn generate(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, ProviderError> {
        check_messages(messages)?;
        check_temperature(temperature)?;
        let prompt: String = messages.iter().map(|m| m.content.as_str()).collect();
        let h = stable_hash(&[prompt.as_bytes()]);
        let reply = format!("1. Placeholder line {:08x}.\n2. Placeholder line {:08x}.", h as u32, (h >> 32) as u32);
        self.meter.record_request(ws_tokens(&prompt), ws_tokens(&reply));
        Ok(reply)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::InvalidRequest("no texts to embed".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for text in texts {
            let mut v = Vec::with_capacity(16);
            for j in 0u8..16 {
                let h = stable_hash(&[text.as_bytes(), &[j]]);
                v.push(2.0 * unit(h) - 1.0);
            }
            out.push(v);
        }
        self.meter.record_request(texts.iter().map(|t| ws_tokens(t)).sum(), 0);
        Ok(out)
    }

    fn usage(&self) -> UsageSnapshot {
        self.meter.snapshot()
    }
}
