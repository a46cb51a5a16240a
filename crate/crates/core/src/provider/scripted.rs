//! Replay provider: hands out canned replies in order and records every
//! call it sees. Used to exercise generation pipelines without a live model
//! and to make corpus generation byte-reproducible in tests.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{
    check_messages, check_temperature, check_top_n, ChatMessage, FirstTokenDistribution,
    LanguageModel, ProviderError, UsageMeter, UsageSnapshot,
};

/// One observed call, kept for assertions and audit trails.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedCall {
    pub operation: String,
    pub prompt: String,
    pub temperature: Option<f64>,
}

#[derive(Deserialize)]
struct ScriptFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    replies: Vec<String>,
    #[serde(default)]
    first_token: Vec<Vec<BTreeMap<String, f64>>>,
}

pub struct ScriptedProvider {
    name: String,
    replies: Mutex<VecDeque<String>>,
    distributions: Mutex<VecDeque<FirstTokenDistribution>>,
    default_distribution: Option<FirstTokenDistribution>,
    calls: Mutex<Vec<ScriptedCall>>,
    meter: UsageMeter,
}

impl ScriptedProvider {
    pub fn new(replies: Vec<String>) -> Self {
        ScriptedProvider {
            name: "scripted".into(),
            replies: Mutex::new(replies.into()),
            distributions: Mutex::new(VecDeque::new()),
            default_distribution: None,
            calls: Mutex::new(Vec::new()),
            meter: UsageMeter::default(),
        }
    }

    /// Loads a reply script from JSON: `{"name": ..., "replies": [...],
    /// "first_token": [[{token: logprob, ...}, ...], ...]}`.
    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            ProviderError::Config(format!("cannot read script {}: {e}", path.display()))
        })?;
        let script: ScriptFile = serde_json::from_str(&raw).map_err(|e| {
            ProviderError::Config(format!("malformed script {}: {e}", path.display()))
        })?;
        let mut provider = ScriptedProvider::new(script.replies);
        if let Some(name) = script.name {
            provider.name = name;
        }
        for positions in script.first_token {
            provider.push_distribution(FirstTokenDistribution::new(positions)?);
        }
        Ok(provider)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn push_distribution(&self, dist: FirstTokenDistribution) {
        self.distributions.lock().unwrap().push_back(dist);
    }

    pub fn set_default_distribution(&mut self, dist: FirstTokenDistribution) {
        self.default_distribution = Some(dist);
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn remaining_replies(&self) -> usize {
        self.replies.lock().unwrap().len()
    }

    fn record(&self, operation: &str, messages: &[ChatMessage], temperature: Option<f64>) {
        let prompt = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        self.calls.lock().unwrap().push(ScriptedCall {
            operation: operation.to_string(),
            prompt,
            temperature,
        });
    }
}

fn ws_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl LanguageModel for ScriptedProvider {
    fn model_name(&self) -> &str {
        &self.name
    }

    fn generate(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, ProviderError> {
        check_messages(messages)?;
        check_temperature(temperature)?;
        self.record("generate", messages, Some(temperature));
        let reply = self.replies.lock().unwrap().pop_front().ok_or_else(|| {
            ProviderError::Protocol("scripted provider ran out of replies".into())
        })?;
        let input: u64 = messages.iter().map(|m| ws_tokens(&m.content)).sum();
        self.meter.record_request(input, ws_tokens(&reply));
        Ok(reply)
    }

    fn first_token_logprobs(
        &self,
        messages: &[ChatMessage],
        top_n: usize,
    ) -> Result<FirstTokenDistribution, ProviderError> {
        check_messages(messages)?;
        check_top_n(top_n)?;
        self.record("first_token_logprobs", messages, None);
        let scripted = self.distributions.lock().unwrap().pop_front();
        let dist = scripted.or_else(|| self.default_distribution.clone()).ok_or_else(|| {
            ProviderError::Protocol("scripted provider has no first-token distribution left".into())
        })?;
        let input: u64 = messages.iter().map(|m| ws_tokens(&m.content)).sum();
        self.meter.record_request(input, 2);
        Ok(dist)
    }

    fn usage(&self) -> UsageSnapshot {
        self.meter.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_in_order_and_errors_when_exhausted() {
        let provider = ScriptedProvider::new(vec!["one".into(), "two".into()]);
        let msg = [ChatMessage::user("hello there")];
        assert_eq!(provider.generate(&msg, 0.5).unwrap(), "one");
        assert_eq!(provider.generate(&msg, 0.5).unwrap(), "two");
        assert!(provider.generate(&msg, 0.5).is_err());
        let calls = provider.calls();
        assert_eq!(calls.len(), 3);
        assert_eq!(calls[0].temperature, Some(0.5));
        assert_eq!(calls[0].prompt, "hello there");
    }

    #[test]
    fn loads_script_from_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.json");
        std::fs::write(
            &path,
            r#"{
                "name": "mock-writer",
                "replies": ["1. First line."],
                "first_token": [[{"yes": -0.1, "no": -2.0}, {"!": -0.5, ".": -1.0}]]
            }"#,
        )
        .unwrap();
        let provider = ScriptedProvider::from_file(&path).unwrap();
        assert_eq!(provider.model_name(), "mock-writer");
        let dist = provider
            .first_token_logprobs(&[ChatMessage::user("q")], 20)
            .unwrap();
        assert_eq!(dist.lookup("yes"), Some((0, -0.1)));
        assert_eq!(provider.generate(&[ChatMessage::user("q")], 0.5).unwrap(), "1. First line.");
    }

    #[test]
    fn unsupported_scoring_reports_capability() {
        let provider = ScriptedProvider::new(vec![]);
        assert!(matches!(
            provider.score_text("x"),
            Err(ProviderError::Capability { .. })
        ));
    }
}
