//! Prompt-based classification: ask a chat model which framing a text aligns
//! with and read the answer off the log-probabilities of the label tokens at
//! the first generated positions, rather than parsing free-form output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logprob::FramingLabel;
use crate::provider::{ChatMessage, LanguageModel, ProviderError};

/// How many alternative tokens to request per generated position.
pub const DEFAULT_TOP_N: usize = 20;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt template: {0}")]
    Template(String),
    #[error("prompt inputs: {0}")]
    InvalidInputs(String),
    #[error("label tokens collide: both labels start with token `{token}`")]
    AmbiguousLabelTokens { token: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Where the in-prompt context statements come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Seeds,
    Distilled,
    Summary,
    ZeroShot,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [
        PromptVariant::Seeds,
        PromptVariant::Distilled,
        PromptVariant::Summary,
        PromptVariant::ZeroShot,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptVariant::Seeds => "seeds",
            PromptVariant::Distilled => "distilled",
            PromptVariant::Summary => "summary",
            PromptVariant::ZeroShot => "zero_shot",
        }
    }
}

impl std::fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seeds" => Ok(PromptVariant::Seeds),
            "distilled" => Ok(PromptVariant::Distilled),
            "summary" => Ok(PromptVariant::Summary),
            "zero_shot" => Ok(PromptVariant::ZeroShot),
            other => Err(PromptError::Template(format!(
                "unknown prompt variant `{other}` (expected seeds, distilled, summary, or zero_shot)"
            ))),
        }
    }
}

const WITH_CONTEXT_TEMPLATE: &str = include_str!("../assets/prompt/with_context.txt");
const ZERO_SHOT_TEMPLATE: &str = include_str!("../assets/prompt/zero_shot.txt");

/// A classification prompt with placeholder slots. `{label_a}` and
/// `{label_b}` must each appear exactly once (in the answer-format clause);
/// `{target}` must appear; the context slots are required for every variant
/// except zero-shot.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    variant: PromptVariant,
    text: String,
}

pub(crate) fn strip_comment_header(raw: &str) -> String {
    raw.lines()
        .filter(|line| !line.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
        .trim_start_matches('\n')
        .to_string()
}

impl PromptTemplate {
    pub fn builtin(variant: PromptVariant) -> PromptTemplate {
        let raw = match variant {
            PromptVariant::ZeroShot => ZERO_SHOT_TEMPLATE,
            _ => WITH_CONTEXT_TEMPLATE,
        };
        PromptTemplate::parse(raw, variant).expect("built-in templates are valid")
    }

    pub fn parse(raw: &str, variant: PromptVariant) -> Result<PromptTemplate, PromptError> {
        let text = strip_comment_header(raw);
        let count = |needle: &str| text.matches(needle).count();
        for label in ["{label_a}", "{label_b}"] {
            match count(label) {
                0 => return Err(PromptError::Template(format!("missing placeholder {label}"))),
                1 => {}
                n => {
                    return Err(PromptError::Template(format!(
                        "placeholder {label} must appear exactly once, found {n}"
                    )))
                }
            }
        }
        if count("{target}") == 0 {
            return Err(PromptError::Template("missing placeholder {target}".into()));
        }
        if variant != PromptVariant::ZeroShot {
            for ctx in ["{context_a}", "{context_b}"] {
                if count(ctx) == 0 {
                    return Err(PromptError::Template(format!(
                        "missing placeholder {ctx} (required for the {variant} variant)"
                    )));
                }
            }
        }
        Ok(PromptTemplate { variant, text })
    }

    pub fn from_file(path: &std::path::Path, variant: PromptVariant) -> Result<Self, PromptError> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            PromptError::Template(format!("cannot read template {}: {e}", path.display()))
        })?;
        PromptTemplate::parse(&raw, variant)
    }

    pub fn variant(&self) -> PromptVariant {
        self.variant
    }

    /// Substitutes the inputs and wraps the result as a single user message.
    /// Zero-shot renders with empty context blocks no matter what context
    /// was supplied.
    pub fn render(&self, inputs: &PromptInputs) -> Result<Vec<ChatMessage>, PromptError> {
        inputs.validate(self.variant)?;
        let (ctx_a, ctx_b) = if self.variant == PromptVariant::ZeroShot {
            ("", "")
        } else {
            (inputs.context_a, inputs.context_b)
        };
        let rendered = self
            .text
            .replace("{label_a}", inputs.label_a)
            .replace("{label_b}", inputs.label_b)
            .replace("{context_a}", ctx_a)
            .replace("{context_b}", ctx_b)
            .replace("{target}", inputs.target);
        Ok(vec![ChatMessage::user(rendered)])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PromptInputs<'a> {
    pub label_a: &'a str,
    pub label_b: &'a str,
    pub context_a: &'a str,
    pub context_b: &'a str,
    pub target: &'a str,
}

impl PromptInputs<'_> {
    fn validate(&self, variant: PromptVariant) -> Result<(), PromptError> {
        if self.label_a.trim().is_empty() || self.label_b.trim().is_empty() {
            return Err(PromptError::InvalidInputs("labels must be non-empty".into()));
        }
        if self.label_a == self.label_b {
            return Err(PromptError::InvalidInputs(format!(
                "labels must differ, both are `{}`",
                self.label_a
            )));
        }
        if self.target.trim().is_empty() {
            return Err(PromptError::InvalidInputs("target text is empty".into()));
        }
        if variant != PromptVariant::ZeroShot
            && (self.context_a.trim().is_empty() || self.context_b.trim().is_empty())
        {
            return Err(PromptError::InvalidInputs(format!(
                "the {variant} variant needs non-empty context for both sides"
            )));
        }
        Ok(())
    }
}

/// First tokens of the two label words under the provider's tokenizer.
/// These are what we look for in the first-token distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTokens {
    pub token_a: String,
    pub token_b: String,
}

impl LabelTokens {
    pub fn new(token_a: impl Into<String>, token_b: impl Into<String>) -> Result<Self, PromptError> {
        let token_a = token_a.into();
        let token_b = token_b.into();
        if token_a == token_b {
            return Err(PromptError::AmbiguousLabelTokens { token: token_a });
        }
        if token_a.is_empty() || token_b.is_empty() {
            return Err(PromptError::InvalidInputs("label tokens must be non-empty".into()));
        }
        Ok(LabelTokens { token_a, token_b })
    }
}

/// Tokenizes both labels through the provider's scoring endpoint and keeps
/// each label's first token. Errors if the labels share a first token, since
/// then their log-probabilities cannot be told apart.
pub fn resolve_label_tokens(
    provider: &dyn LanguageModel,
    label_a: &str,
    label_b: &str,
) -> Result<LabelTokens, PromptError> {
    let first_token = |label: &str| -> Result<String, PromptError> {
        let scored = provider.score_text(label)?;
        Ok(scored.tokens[0].token.clone())
    };
    LabelTokens::new(first_token(label_a)?, first_token(label_b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFailureMode {
    NoLabelToken,
}

impl std::fmt::Display for PromptFailureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PromptFailureMode::NoLabelToken => write!(f, "no_label_token"),
        }
    }
}

/// A prompt classification that produced a usable answer. `delta_equiv`
/// plays the same role as the paired delta: positive favors A. When only one
/// label token made the reported list, the margin is a lower bound against
/// the best score an unreported token could have had (`lower_bound`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDecision {
    pub label: FramingLabel,
    pub delta_equiv: f64,
    pub tie: bool,
    pub lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PromptOutcome {
    Decided(PromptDecision),
    Failed(PromptFailureMode),
}

/// Renders the prompt, fetches first-token distributions, and compares the
/// two label tokens. A target where neither label token shows up is an
/// explicit failure, never a silent default.
pub fn classify_by_prompt(
    provider: &dyn LanguageModel,
    template: &PromptTemplate,
    inputs: &PromptInputs,
    tokens: &LabelTokens,
    top_n: usize,
) -> Result<PromptOutcome, PromptError> {
    let messages = template.render(inputs)?;
    let dist = provider.first_token_logprobs(&messages, top_n)?;
    let hit_a = dist.lookup(&tokens.token_a);
    let hit_b = dist.lookup(&tokens.token_b);
    let floor = dist.floor().expect("validated distribution has a floor");
    let outcome = match (hit_a, hit_b) {
        (Some((_, lp_a)), Some((_, lp_b))) => {
            let delta_equiv = lp_a - lp_b;
            let (label, tie) = FramingLabel::from_delta(delta_equiv);
            PromptOutcome::Decided(PromptDecision { label, delta_equiv, tie, lower_bound: false })
        }
        (Some((_, lp_a)), None) => PromptOutcome::Decided(PromptDecision {
            label: FramingLabel::A,
            delta_equiv: lp_a - floor,
            tie: false,
            lower_bound: true,
        }),
        (None, Some((_, lp_b))) => PromptOutcome::Decided(PromptDecision {
            label: FramingLabel::B,
            delta_equiv: floor - lp_b,
            tie: false,
            lower_bound: true,
        }),
        (None, None) => PromptOutcome::Failed(PromptFailureMode::NoLabelToken),
    };
    Ok(outcome)
}
