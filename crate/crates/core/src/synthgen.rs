//! Synthetic corpus builder. Produces a balanced two-sided collection of
//! framing sentences for a topic in two stages: first a pair of opposing
//! seed perspectives, then bulk sentences aligned with each side. Each side
//! also gets derivatives computed from the seeds alone — a five-sentence
//! distillation, a one-paragraph summary, and a short name — so that no
//! derivative can leak content from the bulk sentences.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::strip_comment_header;
use crate::provider::{ChatMessage, LanguageModel, ProviderError};

const SEEDS_TEMPLATE: &str = include_str!("../assets/synthgen/seeds.txt");
const SENTENCES_TEMPLATE: &str = include_str!("../assets/synthgen/sentences.txt");
const DISTILL_TEMPLATE: &str = include_str!("../assets/synthgen/distill.txt");
const SUMMARY_TEMPLATE: &str = include_str!("../assets/synthgen/summary.txt");
const NAME_TEMPLATE: &str = include_str!("../assets/synthgen/name.txt");

const SYSTEM_LINE: &str =
    "You produce text in exactly the format requested, with no extra commentary.";

pub const DISTILLED_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{stage} generation failed after {attempts} attempt(s): {reason}")]
    Generation { stage: &'static str, attempts: u32, reason: String, transcript: String },
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("corpus file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corpus file {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

impl SynthError {
    /// Full prompt/reply log for a failed generation, for debugging scripts
    /// and prompts. Empty for non-generation errors.
    pub fn transcript(&self) -> &str {
        match self {
            SynthError::Generation { transcript, .. } => transcript,
            _ => "",
        }
    }
}

/// One side of a framing corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingSide {
    pub label: String,
    pub seeds: Vec<String>,
    pub distilled: Vec<String>,
    pub summary: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub model_name: String,
    pub temperature: f64,
    /// Digest of the prompt templates used, so corpora are traceable to a
    /// prompt version.
    pub seed_prompts_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingCorpus {
    pub topic: String,
    pub meta: GenerationMeta,
    pub sides: [FramingSide; 2],
}

impl FramingCorpus {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.topic.trim().is_empty() {
            return Err(SynthError::InvalidCorpus("topic is empty".into()));
        }
        let [a, b] = &self.sides;
        if a.label == b.label {
            return Err(SynthError::InvalidCorpus(format!(
                "both sides are labelled {:?}",
                a.label
            )));
        }
        for side in &self.sides {
            side.validate()?;
        }
        Ok(())
    }

    pub fn side(&self, label: &str) -> Option<&FramingSide> {
        self.sides.iter().find(|s| s.label == label)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        self.validate()?;
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|source| SynthError::Json { path: path.display().to_string(), source })?;
        body.push('\n');
        std::fs::write(path, body)
            .map_err(|source| SynthError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let body = std::fs::read_to_string(path)
            .map_err(|source| SynthError::Io { path: path.display().to_string(), source })?;
        let corpus: FramingCorpus = serde_json::from_str(&body)
            .map_err(|source| SynthError::Json { path: path.display().to_string(), source })?;
        corpus.validate()?;
        Ok(corpus)
    }
}

impl FramingSide {
    fn validate(&self) -> Result<(), SynthError> {
        let label = &self.label;
        if label.trim().is_empty() {
            return Err(SynthError::InvalidCorpus("side label is empty".into()));
        }
        if label.split_whitespace().count() > 3 {
            return Err(SynthError::InvalidCorpus(format!(
                "side label {label:?} has more than 3 words"
            )));
        }
        if self.distilled.len() != DISTILLED_LEN {
            return Err(SynthError::InvalidCorpus(format!(
                "side {label:?} has {} distilled sentences, expected {DISTILLED_LEN}",
                self.distilled.len()
            )));
        }
        if self.seeds.is_empty() {
            return Err(SynthError::InvalidCorpus(format!("side {label:?} has no seeds")));
        }
        if self.summary.trim().is_empty() {
            return Err(SynthError::InvalidCorpus(format!("side {label:?} has an empty summary")));
        }
        let texts = self
            .seeds
            .iter()
            .chain(&self.distilled)
            .chain(&self.sentences)
            .chain(std::iter::once(&self.summary));
        for text in texts {
            if text.trim().is_empty() {
                return Err(SynthError::InvalidCorpus(format!(
                    "side {label:?} contains an empty text"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Bulk sentences to produce per side.
    pub sentence_count: usize,
    pub temperature: f64,
    /// Generation calls per stage before giving up.
    pub max_attempts: u32,
    /// Fixed timestamp for reproducible corpora (tests, mock runs); the
    /// current time when absent.
    pub timestamp_override: Option<u64>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            sentence_count: 50,
            temperature: 0.5,
            max_attempts: 3,
            timestamp_override: None,
        }
    }
}

/// Digest of the prompt templates, recorded into every corpus so results can
/// be traced to a prompt version.
pub fn prompts_hash() -> String {
    let mut hasher = Sha256::new();
    for template in [
        SEEDS_TEMPLATE,
        SENTENCES_TEMPLATE,
        DISTILL_TEMPLATE,
        SUMMARY_TEMPLATE,
        NAME_TEMPLATE,
    ] {
        hasher.update(template.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = strip_comment_header(template);
    for (placeholder, value) in substitutions {
        out = out.replace(placeholder, value);
    }
    out
}

fn numbered(items: &[String]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, item);
    }
    out.trim_end().to_string()
}

/// Collapses case and whitespace so near-identical phrasings dedup together.
fn dedup_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn split_numbered(line: &str) -> Option<(usize, &str)> {
    let digits_end = line.find(|c: char| !c.is_ascii_digit())?;
    if digits_end == 0 {
        return None;
    }
    let number: usize = line[..digits_end].parse().ok()?;
    let rest = line[digits_end..].strip_prefix(['.', ')'])?;
    Some((number, rest.trim()))
}

/// Strict numbered-list grammar: every non-blank line is `<n>. <text>` (or
/// `<n>) <text>`) with n counting up from 1. Anything else is a parse error,
/// which callers turn into a regeneration attempt.
pub fn parse_numbered_list(text: &str) -> Result<Vec<String>, String> {
    let mut items = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (number, rest) = split_numbered(line)
            .ok_or_else(|| format!("line {}: expected `<n>. <text>`, got {raw:?}", idx + 1))?;
        if number != items.len() + 1 {
            return Err(format!(
                "line {}: expected item {}, got item {number}",
                idx + 1,
                items.len() + 1
            ));
        }
        if rest.is_empty() {
            return Err(format!("line {}: item {number} has no text", idx + 1));
        }
        items.push(rest.to_string());
    }
    if items.is_empty() {
        return Err("no numbered items found".into());
    }
    Ok(items)
}

/// Parses the seed-stage reply: a `PERSPECTIVE A:` block and a
/// `PERSPECTIVE B:` block, each holding one numbered list.
pub fn parse_perspective_blocks(text: &str) -> Result<(Vec<String>, Vec<String>), String> {
    let mut blocks: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut current: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let header = match line {
            "PERSPECTIVE A:" => Some(0),
            "PERSPECTIVE B:" => Some(1),
            _ => None,
        };
        if let Some(block) = header {
            if block == 1 && blocks[0].is_empty() {
                return Err(format!("line {}: PERSPECTIVE B before any A items", idx + 1));
            }
            if !blocks[block].is_empty() {
                return Err(format!("line {}: duplicate {line:?} block", idx + 1));
            }
            current = Some(block);
            continue;
        }
        let block = current
            .ok_or_else(|| format!("line {}: text before the PERSPECTIVE A: header", idx + 1))?;
        let (number, rest) = split_numbered(line)
            .ok_or_else(|| format!("line {}: expected `<n>. <text>`, got {raw:?}", idx + 1))?;
        if number != blocks[block].len() + 1 {
            return Err(format!(
                "line {}: expected item {}, got item {number}",
                idx + 1,
                blocks[block].len() + 1
            ));
        }
        if rest.is_empty() {
            return Err(format!("line {}: item {number} has no text", idx + 1));
        }
        blocks[block].push(rest.to_string());
    }
    let [a, b] = blocks;
    if a.is_empty() || b.is_empty() {
        return Err("both PERSPECTIVE blocks must hold at least one item".into());
    }
    Ok((a, b))
}

/// One generation call per attempt until `parse` accepts the reply.
fn generate_with_retry<T>(
    provider: &dyn LanguageModel,
    stage: &'static str,
    prompt: &str,
    options: &SynthOptions,
    mut parse: impl FnMut(&str) -> Result<T, String>,
) -> Result<T, SynthError> {
    let mut transcript = String::new();
    let mut last_issue = String::new();
    for attempt in 1..=options.max_attempts {
        let messages = [ChatMessage::system(SYSTEM_LINE), ChatMessage::user(prompt)];
        let reply = provider.generate(&messages, options.temperature)?;
        let _ = write!(
            transcript,
            "--- {stage} attempt {attempt} prompt ---\n{prompt}\n--- {stage} attempt {attempt} reply ---\n{reply}\n"
        );
        match parse(&reply) {
            Ok(value) => return Ok(value),
            Err(issue) => last_issue = issue,
        }
    }
    Err(SynthError::Generation {
        stage,
        attempts: options.max_attempts,
        reason: last_issue,
        transcript,
    })
}

/// Step one of the pipeline: two opposing seed perspectives for a topic.
pub fn gen_seeds(
    topic: &str,
    provider: &dyn LanguageModel,
    options: &SynthOptions,
) -> Result<(Vec<String>, Vec<String>), SynthError> {
    if topic.trim().is_empty() {
        return Err(SynthError::InvalidCorpus("topic is empty".into()));
    }
    let prompt = render(SEEDS_TEMPLATE, &[("{topic}", topic)]);
    generate_with_retry(provider, "seeds", &prompt, options, parse_perspective_blocks)
}

/// Step two: bulk sentences aligned with one side's seeds. Duplicates (after
/// case/whitespace collapse, including duplicates of the seeds themselves)
/// are dropped and the shortfall re-requested, up to the attempt cap.
pub fn gen_sentences(
    seeds: &[String],
    count: usize,
    provider: &dyn LanguageModel,
    options: &SynthOptions,
) -> Result<Vec<String>, SynthError> {
    if seeds.is_empty() {
        return Err(SynthError::InvalidCorpus("no seed sentences".into()));
    }
    if count == 0 {
        return Err(SynthError::InvalidCorpus("sentence count must be at least 1".into()));
    }
    let seed_block = numbered(seeds);
    let mut unique: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = seeds.iter().map(|s| dedup_key(s)).collect();
    let mut transcript = String::new();
    let mut last_issue = String::new();
    for attempt in 1..=options.max_attempts {
        let need = count - unique.len();
        let prompt = render(
            SENTENCES_TEMPLATE,
            &[("{seeds}", seed_block.as_str()), ("{count}", &need.to_string())],
        );
        let messages = [ChatMessage::system(SYSTEM_LINE), ChatMessage::user(&prompt)];
        let reply = provider.generate(&messages, options.temperature)?;
        let _ = write!(
            transcript,
            "--- sentences attempt {attempt} prompt ---\n{prompt}\n--- sentences attempt {attempt} reply ---\n{reply}\n"
        );
        match parse_numbered_list(&reply) {
            Err(issue) => last_issue = issue,
            Ok(items) => {
                for item in items {
                    if seen.insert(dedup_key(&item)) {
                        unique.push(item);
                    }
                }
                if unique.len() >= count {
                    unique.truncate(count);
                    return Ok(unique);
                }
                last_issue =
                    format!("only {} unique sentences after dedup, need {count}", unique.len());
            }
        }
    }
    Err(SynthError::Generation {
        stage: "sentences",
        attempts: options.max_attempts,
        reason: last_issue,
        transcript,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub distilled: Vec<String>,
    pub summary: String,
    pub name: String,
}

fn parse_summary(reply: &str) -> Result<String, String> {
    let text = reply.trim();
    if text.is_empty() {
        return Err("empty summary".into());
    }
    Ok(text.to_string())
}

fn parse_name(reply: &str) -> Result<String, String> {
    let text = reply.trim().trim_matches(['"', '\'']).trim();
    if text.is_empty() {
        return Err("empty name".into());
    }
    if text.lines().count() > 1 {
        return Err(format!("name spans multiple lines: {text:?}"));
    }
    let words = text.split_whitespace().count();
    if words > 3 {
        return Err(format!("name {text:?} has {words} words, at most 3 allowed"));
    }
    Ok(text.to_string())
}

/// Distillation, summary, and short name for one side — all prompted from
/// the seeds alone, never from the bulk sentences.
pub fn gen_derivatives(
    seeds: &[String],
    provider: &dyn LanguageModel,
    options: &SynthOptions,
) -> Result<Derivatives, SynthError> {
    if seeds.is_empty() {
        return Err(SynthError::InvalidCorpus("no seed sentences".into()));
    }
    let seed_block = numbered(seeds);
    let seeds_only = [("{seeds}", seed_block.as_str())];

    let distilled = generate_with_retry(
        provider,
        "distill",
        &render(DISTILL_TEMPLATE, &seeds_only),
        options,
        |reply| {
            let items = parse_numbered_list(reply)?;
            if items.len() != DISTILLED_LEN {
                return Err(format!(
                    "distillation has {} items, expected {DISTILLED_LEN}",
                    items.len()
                ));
            }
            Ok(items)
        },
    )?;
    let summary = generate_with_retry(
        provider,
        "summary",
        &render(SUMMARY_TEMPLATE, &seeds_only),
        options,
        parse_summary,
    )?;
    let name = generate_with_retry(
        provider,
        "name",
        &render(NAME_TEMPLATE, &seeds_only),
        options,
        parse_name,
    )?;
    Ok(Derivatives { distilled, summary, name })
}

/// Runs the whole pipeline for one topic. Per side, derivatives are produced
/// before any bulk sentence exists, so derivative prompts cannot contain
/// bulk text; the stage order below is what enforces that.
pub fn generate_corpus(
    topic: &str,
    provider: &dyn LanguageModel,
    options: &SynthOptions,
) -> Result<FramingCorpus, SynthError> {
    let (seeds_a, seeds_b) = gen_seeds(topic, provider, options)?;

    let mut sides = Vec::with_capacity(2);
    for seeds in [seeds_a, seeds_b] {
        let derivatives = gen_derivatives(&seeds, provider, options)?;
        let sentences = gen_sentences(&seeds, options.sentence_count, provider, options)?;
        sides.push(FramingSide {
            label: derivatives.name,
            seeds,
            distilled: derivatives.distilled,
            summary: derivatives.summary,
            sentences,
        });
    }
    let [side_a, side_b]: [FramingSide; 2] = sides.try_into().expect("two sides");
    if side_a.label == side_b.label {
        return Err(SynthError::InvalidCorpus(format!(
            "generated side names collide: {:?}; rerun generation",
            side_a.label
        )));
    }

    let timestamp = match options.timestamp_override {
        Some(t) => t,
        None => SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let corpus = FramingCorpus {
        topic: topic.to_string(),
        meta: GenerationMeta {
            model_name: provider.model_name().to_string(),
            temperature: options.temperature,
            seed_prompts_hash: prompts_hash(),
            timestamp,
        },
        sides: [side_a, side_b],
    };
    corpus.validate()?;
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideStats {
    pub label: String,
    pub count: usize,
    pub mean_chars: f64,
    pub mean_tokens: f64,
    pub mean_word_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceFlag {
    pub metric: &'static str,
    pub side_a: f64,
    pub side_b: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub sides: [SideStats; 2],
    pub flags: Vec<BalanceFlag>,
}

pub const BALANCE_GAP_THRESHOLD: f64 = 0.15;
pub const BALANCE_MIN_SENTENCES: usize = 20;

fn side_stats(side: &FramingSide) -> SideStats {
    let count = side.sentences.len();
    let mut chars = 0usize;
    let mut tokens = 0usize;
    let mut token_chars = 0usize;
    for sentence in &side.sentences {
        chars += sentence.chars().count();
        for token in sentence.split_whitespace() {
            tokens += 1;
            token_chars += token.chars().count();
        }
    }
    SideStats {
        label: side.label.clone(),
        count,
        mean_chars: chars as f64 / count as f64,
        mean_tokens: tokens as f64 / count as f64,
        mean_word_len: if tokens == 0 { 0.0 } else { token_chars as f64 / tokens as f64 },
    }
}

/// Symmetric relative difference: |a-b| over the mean of the two.
fn relative_gap(a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    if mid == 0.0 {
        0.0
    } else {
        (a - b).abs() / mid
    }
}

/// Compares per-side sentence-length and wording statistics; any metric
/// whose side means differ by more than 15% relatively is flagged.
pub fn balance_audit(corpus: &FramingCorpus) -> Result<BalanceReport, SynthError> {
    for side in &corpus.sides {
        if side.sentences.len() < BALANCE_MIN_SENTENCES {
            return Err(SynthError::InvalidCorpus(format!(
                "side {:?} has {} sentences; the balance audit needs at least {BALANCE_MIN_SENTENCES} per side",
                side.label,
                side.sentences.len()
            )));
        }
    }
    let stats_a = side_stats(&corpus.sides[0]);
    let stats_b = side_stats(&corpus.sides[1]);
    let mut flags = Vec::new();
    let metrics: [(&'static str, f64, f64); 3] = [
        ("mean_chars", stats_a.mean_chars, stats_b.mean_chars),
        ("mean_tokens", stats_a.mean_tokens, stats_b.mean_tokens),
        ("mean_word_len", stats_a.mean_word_len, stats_b.mean_word_len),
    ];
    for (metric, a, b) in metrics {
        let gap = relative_gap(a, b);
        if gap > BALANCE_GAP_THRESHOLD {
            flags.push(BalanceFlag { metric, side_a: a, side_b: b, relative_gap: gap });
        }
    }
    Ok(BalanceReport { sides: [stats_a, stats_b], flags })
}
