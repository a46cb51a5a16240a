//! End-to-end tests of the installed binary: full offline runs, resume
//! behaviour, report determinism, scripted corpus generation, and the
//! startup failures that must carry a useful message.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use framealign::{FramingCorpus, FramingSide, GenerationMeta};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_framealign")
}

fn run_cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary launches")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Two stylistically disjoint sides; sentence endings and starts carry the
/// signal, which is what a character model conditioned on a prefix can see.
fn style_corpus(topic: &str) -> FramingCorpus {
    let dog = |i: usize| format!("dogs {} the house.", ["guard", "love", "warm", "cheer"][i % 4]);
    let cat = |i: usize| format!("cats {} the attic.", ["watch", "haunt", "claim", "roam"][i % 4]);
    let side = |label: &str, make: &dyn Fn(usize) -> String, summary: &str| FramingSide {
        label: label.to_string(),
        seeds: (0..3).map(|i| format!("Seed thought {i}: {}", make(i))).collect(),
        distilled: (0..5).map(make).collect(),
        summary: summary.to_string(),
        sentences: (0..24).map(make).collect(),
    };
    FramingCorpus {
        topic: topic.to_string(),
        meta: GenerationMeta {
            model_name: "fixture".into(),
            temperature: 0.5,
            seed_prompts_hash: "0".into(),
            timestamp: 0,
        },
        sides: [
            side("dog life", &dog, "Dogs keep the household lively."),
            side("cat life", &cat, "Cats run the attic on their own terms."),
        ],
    }
}

const RUN_CONFIG: &str = r#"
seed = 3
output_dir = "out"
datasets = ["pets.json"]

[options]
lr_replicates = 2
test_per_side = 5
targets_per_side = 6
bootstrap_replicates = 20
bootstrap_samples = 50

[[providers]]
name = "mock"
kind = "ngram"
order = 3
alpha = 0.2

[[methods]]
family = "paired"
models = ["mock"]
ks = [1, 2]

[[methods]]
family = "tfidf"
train_sizes = [10]
"#;

fn write_run_fixture(dir: &Path) -> PathBuf {
    style_corpus("pets").save(&dir.join("pets.json")).unwrap();
    let config = dir.join("run.toml");
    std::fs::write(&config, RUN_CONFIG).unwrap();
    config
}

#[test]
fn offline_run_then_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_run_fixture(dir.path());

    let first = run_cli(dir.path(), &["run", "--config", config.to_str().unwrap()]);
    let text = stdout_of(&first);
    assert_eq!(first.status.code(), Some(0), "stdout:\n{text}\nstderr:\n{}", stderr_of(&first));
    assert!(text.contains("ok paired/mock/pets/k=1"), "{text}");
    assert!(text.contains("ok tfidf/tfidf/pets/n=10"), "{text}");
    assert!(text.contains("3 run, 0 skipped, 0 failed"), "{text}");

    let cells_dir = dir.path().join("out/cells");
    let markers: Vec<_> = std::fs::read_dir(&cells_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    assert_eq!(markers.len(), 3);
    assert!(dir.path().join("out/run_meta.json").exists());

    // A second invocation touches nothing: every cell is already on disk.
    let second = run_cli(dir.path(), &["run", "--config", config.to_str().unwrap()]);
    let text = stdout_of(&second);
    assert_eq!(second.status.code(), Some(0));
    assert!(text.contains("0 run, 3 skipped, 0 failed"), "{text}");

    let report = run_cli(
        dir.path(),
        &["report", "--cells", "out/cells", "--out", "out/report"],
    );
    assert_eq!(report.status.code(), Some(0), "stderr:\n{}", stderr_of(&report));

    let summary = std::fs::read_to_string(dir.path().join("out/report/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,model,topic,variant,f1,ci_low,ci_high,bias,bias_significant,cost");
    assert_eq!(lines.len(), 4, "header plus one row per cell:\n{summary}");
    let paired_row = lines.iter().find(|l| l.starts_with("paired,mock,pets,k=1")).unwrap();
    let f1_field = paired_row.split(',').nth(4).unwrap();
    assert!(!f1_field.is_empty(), "paired cell must report an F1: {paired_row}");
    assert!(
        f1_field.parse::<f64>().unwrap() > 0.8,
        "stylistically disjoint sides should separate: {paired_row}"
    );

    // Reports are a pure function of the cell records.
    let again = run_cli(
        dir.path(),
        &["report", "--cells", "out/cells", "--out", "out/report2"],
    );
    assert_eq!(again.status.code(), Some(0));
    for name in ["summary.csv", "plot_data.json", "items.jsonl"] {
        let a = std::fs::read(dir.path().join("out/report").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("out/report2").join(name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across reruns");
    }
}

#[test]
fn dry_run_estimates_without_creating_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_run_fixture(dir.path());

    let dry = run_cli(dir.path(), &["run", "--config", config.to_str().unwrap(), "--dry-run"]);
    assert_eq!(dry.status.code(), Some(0), "stderr:\n{}", stderr_of(&dry));
    let text = stdout_of(&dry);
    assert!(text.starts_with("cell,calls,input_tokens,output_tokens,cost"), "{text}");
    assert!(text.lines().last().unwrap().starts_with("total,"), "{text}");
    let paired_line = text.lines().find(|l| l.starts_with("paired/mock/pets/k=1")).unwrap();
    let calls: u64 = paired_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!(calls > 0, "paired cells cost completions: {paired_line}");
    assert!(!dir.path().join("out").exists(), "a dry run must write nothing");

    // The cost subcommand is the same estimator under its own name.
    let cost = run_cli(dir.path(), &["cost", "--config", config.to_str().unwrap()]);
    assert_eq!(cost.status.code(), Some(0));
    assert_eq!(stdout_of(&cost), text);
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn synthgen_replies(sentences_per_side: usize) -> String {
    let seeds = |word: &str, place: &str| {
        (0..3)
            .map(|i| format!("{word} make {place} feel alive, reason {i}."))
            .collect::<Vec<_>>()
    };
    let seeds_reply = format!(
        "PERSPECTIVE A:\n{}\n\nPERSPECTIVE B:\n{}",
        numbered(&seeds("Dogs", "homes")),
        numbered(&seeds("Cats", "attics"))
    );
    let distilled = |word: &str| {
        numbered(&(0..5).map(|i| format!("{word} claim number {i}.")).collect::<Vec<_>>())
    };
    let sentences = |word: &str| {
        numbered(
            &(0..sentences_per_side)
                .map(|i| format!("{word} daily observation {i}."))
                .collect::<Vec<_>>(),
        )
    };
    let replies = vec![
        seeds_reply,
        distilled("Dog"),
        "Dogs enrich shared family routines.".to_string(),
        "dog life".to_string(),
        sentences("Dog"),
        distilled("Cat"),
        "Cats prize their independence.".to_string(),
        "cat life".to_string(),
        sentences("Cat"),
    ];
    serde_json::to_string_pretty(&serde_json::json!({ "replies": replies })).unwrap()
}

#[test]
fn scripted_corpus_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("replies.json"), synthgen_replies(20)).unwrap();

    let args = |out: &'static str| {
        vec![
            "synthgen",
            "--topic",
            "pet ownership",
            "--mock",
            "replies.json",
            "--out",
            out,
            "--sentences",
            "20",
        ]
    };
    let first = run_cli(dir.path(), &args("corpus1.json"));
    assert_eq!(first.status.code(), Some(0), "stderr:\n{}", stderr_of(&first));
    let text = stdout_of(&first);
    assert!(text.contains("balance audit:"), "{text}");
    assert!(text.contains("dog life: 20 sentences"), "{text}");

    let corpus = FramingCorpus::load(&dir.path().join("corpus1.json")).unwrap();
    assert_eq!(corpus.topic, "pet ownership");
    assert_eq!(corpus.sides[0].label, "dog life");
    assert_eq!(corpus.sides[1].label, "cat life");
    assert_eq!(corpus.sides[0].sentences.len(), 20);

    // A nested output path is created on the way; the bytes must not care
    // where the file landed.
    let second = run_cli(dir.path(), &args("corpora/deep/corpus2.json"));
    assert_eq!(second.status.code(), Some(0), "stderr:\n{}", stderr_of(&second));
    let a = std::fs::read(dir.path().join("corpus1.json")).unwrap();
    let b = std::fs::read(dir.path().join("corpora/deep/corpus2.json")).unwrap();
    assert_eq!(a, b, "scripted generation must be byte-stable");
}

#[test]
fn failed_generation_prints_the_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let replies: Vec<String> = (0..3).map(|_| "no numbered list here".to_string()).collect();
    std::fs::write(
        dir.path().join("replies.json"),
        serde_json::to_string(&serde_json::json!({ "replies": replies })).unwrap(),
    )
    .unwrap();

    let output = run_cli(
        dir.path(),
        &["synthgen", "--topic", "pets", "--mock", "replies.json", "--out", "corpus.json"],
    );
    assert_eq!(output.status.code(), Some(1));
    let err = stderr_of(&output);
    assert!(err.contains("generation transcript"), "{err}");
    assert!(!dir.path().join("corpus.json").exists());
}

#[test]
fn missing_api_key_variable_is_named_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    style_corpus("pets").save(&dir.path().join("pets.json")).unwrap();
    let config = r#"
output_dir = "out"
datasets = ["pets.json"]

[[providers]]
name = "remote"
kind = "openai"
endpoint_url = "https://example.invalid/v1"
model_name = "scorer-1"
api_key_env = "FRAMEALIGN_CLI_TEST_NO_KEY"

[[methods]]
family = "paired"
models = ["remote"]
ks = [1]
"#;
    std::fs::write(dir.path().join("run.toml"), config).unwrap();

    let output = run_cli(dir.path(), &["run", "--config", "run.toml"]);
    assert_eq!(output.status.code(), Some(2), "stdout:\n{}", stdout_of(&output));
    let err = stderr_of(&output);
    assert!(err.contains("FRAMEALIGN_CLI_TEST_NO_KEY"), "{err}");
    assert!(!dir.path().join("out/cells").exists(), "no cell may run without credentials");
}

#[test]
fn report_refuses_an_empty_cell_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("cells")).unwrap();

    let output = run_cli(dir.path(), &["report", "--cells", "cells", "--out", "report"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("no completed cells"), "{}", stderr_of(&output));
}

#[test]
fn config_refusing_inline_secrets_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
output_dir = "out"

[[providers]]
name = "remote"
kind = "openai"
endpoint_url = "https://example.invalid/v1"
model_name = "scorer-1"
api_key = "sk-not-allowed"
"#;
    std::fs::write(dir.path().join("run.toml"), config).unwrap();

    let output = run_cli(dir.path(), &["run", "--config", "run.toml"]);
    assert_eq!(output.status.code(), Some(2));
    let err = stderr_of(&output);
    assert!(err.contains("api_key_env"), "{err}");
    assert!(!err.contains("sk-not-allowed"), "secret must not be echoed: {err}");
}
