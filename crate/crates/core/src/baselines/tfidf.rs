//! Bag-of-words TF-IDF features over lowercased, punctuation-stripped
//! unigrams. Vocabulary and document frequencies come from the fit corpus
//! only; transform never grows the vocabulary.

use std::collections::{BTreeMap, HashMap};

use super::BaselineError;

/// Lowercases, replaces every non-alphanumeric character with a space, and
/// splits on whitespace. Shared by every lexical feature in the crate so the
/// baselines tokenize identically.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Sparse feature vector: (index, value) pairs sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TfidfVectorizer {
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfidfVectorizer {
    /// Learns vocabulary and smoothed inverse document frequencies:
    /// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
    pub fn fit(documents: &[String]) -> Result<TfidfVectorizer, BaselineError> {
        if documents.is_empty() {
            return Err(BaselineError::InvalidTraining("no documents to fit TF-IDF on".into()));
        }
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<String> = tokenize(doc);
            seen.sort();
            seen.dedup();
            for token in seen {
                *df.entry(token).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(BaselineError::InvalidTraining(
                "documents contain no tokens after normalization".into(),
            ));
        }
        let n = documents.len() as f64;
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (token, count)) in df.into_iter().enumerate() {
            vocab.insert(token, i);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(TfidfVectorizer { vocab, idf })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocab.get(token).map(|&i| self.idf[i])
    }

    /// Term counts weighted by idf, then L2-normalized. A text of entirely
    /// unseen tokens becomes the zero vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for token in tokenize(text) {
            if let Some(&i) = self.vocab.get(&token) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            counts.into_iter().map(|(i, tf)| (i, tf * self.idf[i])).collect();
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for entry in &mut entries {
                entry.1 /= norm;
            }
        }
        SparseVector { entries }
    }
}
