//! Character n-gram model with additive smoothing. Runs entirely in-process,
//! which makes it the workhorse for offline runs and for checking the
//! scoring pipeline against hand-computable numbers.

use std::collections::{BTreeSet, HashMap};

use super::{
    check_text_non_empty, LanguageModel, ProviderError, ScoredSequence, TokenLogProb, UsageMeter,
    UsageSnapshot,
};

#[derive(Debug, Default)]
struct ContextCounts {
    next: HashMap<char, u64>,
    total: u64,
}

/// Character-level model of order `n`: each character is predicted from the
/// `n` characters before it (fewer near the start of a text), with add-alpha
/// smoothing over the exact character set of the training corpus.
#[derive(Debug)]
pub struct NGramModel {
    name: String,
    order: usize,
    alpha: f64,
    vocab: BTreeSet<char>,
    counts: HashMap<String, ContextCounts>,
    meter: UsageMeter,
}

impl NGramModel {
    pub fn fit(corpus: &[String], order: usize, alpha: f64) -> Result<Self, ProviderError> {
        if order == 0 {
            return Err(ProviderError::Config("ngram order must be at least 1".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ProviderError::Config(format!(
                "smoothing alpha must be positive and finite, got {alpha}"
            )));
        }
        let vocab: BTreeSet<char> = corpus.iter().flat_map(|s| s.chars()).collect();
        if vocab.is_empty() {
            return Err(ProviderError::Config("training corpus has no characters".into()));
        }

        let mut counts: HashMap<String, ContextCounts> = HashMap::new();
        for text in corpus {
            let chars: Vec<char> = text.chars().collect();
            for i in 0..chars.len() {
                let next = chars[i];
                for ctx_len in 0..=order.min(i) {
                    let ctx: String = chars[i - ctx_len..i].iter().collect();
                    let entry = counts.entry(ctx).or_default();
                    *entry.next.entry(next).or_insert(0) += 1;
                    entry.total += 1;
                }
            }
        }

        Ok(NGramModel {
            name: format!("ngram{order}"),
            order,
            alpha,
            vocab,
            counts,
            meter: UsageMeter::default(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> impl Iterator<Item = char> + '_ {
        self.vocab.iter().copied()
    }

    /// Smoothed probability of `next` after the exact context `ctx`. A
    /// context never seen in training degrades to the uniform 1/|V|.
    pub fn prob(&self, ctx: &str, next: char) -> Result<f64, ProviderError> {
        if !self.vocab.contains(&next) {
            return Err(ProviderError::OutOfVocabulary { ch: next });
        }
        let (seen_next, seen_total) = match self.counts.get(ctx) {
            Some(c) => (c.next.get(&next).copied().unwrap_or(0), c.total),
            None => (0, 0),
        };
        let v = self.vocab.len() as f64;
        Ok((seen_next as f64 + self.alpha) / (seen_total as f64 + self.alpha * v))
    }
}

impl LanguageModel for NGramModel {
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
        for i in 0..chars.len() {
            let start = i.saturating_sub(self.order);
            let ctx: String = chars[start..i].iter().collect();
            let p = self.prob(&ctx, chars[i])?;
            tokens.push(TokenLogProb { token: chars[i].to_string(), logprob: Some(p.ln()) });
        }
        self.meter.record_request(chars.len() as u64, 0);
        ScoredSequence::from_tokens(tokens)
    }

    fn usage(&self) -> UsageSnapshot {
        self.meter.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_bigram_matches_hand_computation() {
        let model = NGramModel::fit(&["ab".to_string()], 1, 1.0).unwrap();
        // count(a->b) = 1, count(a) = 1, |V| = 2: (1+1)/(1+2) = 2/3
        assert_eq!(model.prob("a", 'b').unwrap(), 2.0 / 3.0);
        // 'b' never appears as a context: uniform 1/|V|
        assert_eq!(model.prob("b", 'a').unwrap(), 0.5);
        assert_eq!(model.prob("b", 'b').unwrap(), 0.5);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let model = NGramModel::fit(&["abcabc".to_string()], 2, 0.5).unwrap();
        let v = model.vocab_size() as f64;
        for next in ['a', 'b', 'c'] {
            assert!((model.prob("cc", next).unwrap() - 1.0 / v).abs() < 1e-15);
        }
    }

    #[test]
    fn conditionals_normalize_to_one() {
        let corpus = vec!["the cat sat".to_string(), "the dog ran".to_string()];
        let model = NGramModel::fit(&corpus, 3, 0.3).unwrap();
        for ctx in ["", "t", "th", "the", "zzz", " ca"] {
            let sum: f64 = model.vocab().map(|c| model.prob(ctx, c).unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "context {ctx:?} sums to {sum}");
        }
    }

    #[test]
    fn score_matches_chain_rule_recomputation() {
        let corpus = vec!["abab".to_string(), "abba".to_string()];
        let model = NGramModel::fit(&corpus, 2, 1.0).unwrap();
        let text = "abba";
        let seq = model.score_text(text).unwrap();

        let chars: Vec<char> = text.chars().collect();
        let mut expected = 0.0;
        for i in 0..chars.len() {
            let ctx: String = chars[i.saturating_sub(2)..i].iter().collect();
            expected += model.prob(&ctx, chars[i]).unwrap().ln();
        }
        assert!((seq.total.value() - expected).abs() < 1e-12);
        assert_eq!(seq.tokens.len(), 4);
        assert_eq!(seq.text, "abba");
    }

    #[test]
    fn scoring_is_deterministic() {
        let corpus = vec!["deterministic scoring".to_string()];
        let a = NGramModel::fit(&corpus, 3, 1.0).unwrap();
        let b = NGramModel::fit(&corpus, 3, 1.0).unwrap();
        let sa = a.score_text("determinism").unwrap();
        let sb = b.score_text("determinism").unwrap();
        assert_eq!(sa.total.value(), sb.total.value());
        assert_eq!(sa.tokens, sb.tokens);
    }

    #[test]
    fn out_of_vocabulary_character_is_an_error() {
        let model = NGramModel::fit(&["ab".to_string()], 1, 1.0).unwrap();
        let err = model.score_text("abz").unwrap_err();
        assert!(matches!(err, ProviderError::OutOfVocabulary { ch: 'z' }));
    }

    #[test]
    fn invalid_fit_parameters_are_rejected() {
        assert!(NGramModel::fit(&["ab".to_string()], 0, 1.0).is_err());
        assert!(NGramModel::fit(&["ab".to_string()], 1, 0.0).is_err());
        assert!(NGramModel::fit(&[], 1, 1.0).is_err());
        assert!(NGramModel::fit(&[String::new()], 1, 1.0).is_err());
    }

    #[test]
    fn empty_text_and_unsupported_ops_error() {
        let model = NGramModel::fit(&["ab".to_string()], 1, 1.0).unwrap();
        assert!(matches!(model.score_text(""), Err(ProviderError::InvalidRequest(_))));
        assert!(matches!(
            model.generate(&[], 0.5),
            Err(ProviderError::Capability { .. })
        ));
    }

    #[test]
    fn meter_counts_scoring_requests() {
        let model = NGramModel::fit(&["abcd".to_string()], 1, 1.0).unwrap();
        model.score_text("abc").unwrap();
        model.score_text("d").unwrap();
        let usage = model.usage();
        assert_eq!(usage.requests, 2);
        assert_eq!(usage.input_tokens, 4);
    }
}
