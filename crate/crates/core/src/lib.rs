//! Framing-detection toolkit: scores candidate texts against paired framing
//! contexts using next-token log-probabilities, with prompt-based and
//! trained-classifier baselines and the evaluation machinery to compare them.

mod hash;

pub mod baselines;
pub mod engine;
pub mod evaluator;
pub mod logprob;
pub mod prompt;
pub mod provider;
pub mod synthgen;

pub use baselines::{
    fetch_embeddings, run_baseline, BaselineError, BaselineRun, FeatureSource, LogisticModel,
    ReplicateOutcome, SparseVector, TfidfVectorizer, TrainOptions, TrainPlan, WordVectorTable,
};
pub use engine::{
    concatenate, conditioner_prefix, estimate_calls, estimate_calls_with, plan_pairings,
    run_paired, CallEstimate, Conditioner, EngineError, PairingDraw, PairingPlan,
    PairedRunOutcome, PrimingSet, Target, TargetBatch, TargetFailure, TargetOutcome, TargetPlan,
    DEFAULT_TOKEN_INFLATION,
};
pub use evaluator::{
    bias, bias_with_ci, bootstrap_f1_ci, enumerate_cells, estimate_cell_cost, f1, items_jsonl,
    plot_data_json, replicate_ci, run_cell, run_matrix, summary_csv, BiasEstimate,
    BootstrapParams, CellResult, CellSpec, CiMethod, ConfusionMatrix, CostLedger, EvalError,
    ItemOutcome, MatrixContext, MatrixPlan, MethodFamily, MetricWithCi, ModelPrices, ModelSet,
    RunOptions,
};
pub use logprob::{
    classify, conditional_logprob, delta, Classification, ConditionalLogProb, DeltaRecord,
    FramingLabel, LogProbError, LogProbTotal, ScoredConditional,
};
pub use prompt::{
    classify_by_prompt, resolve_label_tokens, LabelTokens, PromptDecision, PromptError,
    PromptFailureMode, PromptInputs, PromptOutcome, PromptTemplate, PromptVariant, DEFAULT_TOP_N,
};
pub use synthgen::{
    balance_audit, gen_derivatives, gen_seeds, gen_sentences, generate_corpus, BalanceReport,
    Derivatives, FramingCorpus, FramingSide, GenerationMeta, SynthError, SynthOptions,
};
pub use provider::{
    cache_key, score_many, ChatMessage, FirstTokenDistribution, LanguageModel, NGramModel,
    OpenAiCompatible, ProviderConfig, ProviderError, ResponseCache, RetryPolicy, Role,
    ScoredSequence, ScriptedCall, ScriptedProvider, StubProvider, TokenLogProb, UsageMeter,
    UsageSnapshot,
};
