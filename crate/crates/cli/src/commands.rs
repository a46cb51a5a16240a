//! The four subcommands. Each returns a process exit code on its success
//! path: 0 for a clean result, 1 when some cells failed but the run itself
//! went through. Hard errors come back as `CliError` instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use framealign::{
    balance_audit, estimate_cell_cost, generate_corpus, items_jsonl, plot_data_json, run_cell,
    summary_csv, CellResult, CostLedger, MatrixContext, ScriptedProvider, SynthError,
    SynthOptions,
};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    /// Wrong invocation or unusable inputs: exits with the config code.
    #[error("{0}")]
    Usage(String),
    /// The command ran but could not finish its job.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub struct SynthgenArgs {
    pub topic: String,
    pub out: PathBuf,
    pub mock: Option<PathBuf>,
    pub provider: Option<String>,
    pub config: Option<PathBuf>,
    pub sentences: usize,
    pub temperature: f64,
}

pub fn cmd_synthgen(args: &SynthgenArgs) -> Result<i32, CliError> {
    let mut options = SynthOptions {
        sentence_count: args.sentences,
        temperature: args.temperature,
        ..SynthOptions::default()
    };

    let provider: Box<dyn framealign::LanguageModel> = match (&args.mock, &args.provider) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("pass either --mock or --provider, not both".into()))
        }
        (Some(replies), None) => {
            // Scripted runs are frozen end to end so the corpus file is
            // reproducible byte for byte.
            options.timestamp_override = Some(0);
            let scripted = ScriptedProvider::from_file(replies)
                .map_err(|e| CliError::Usage(format!("--mock {}: {e}", replies.display())))?;
            Box::new(scripted)
        }
        (None, Some(name)) => {
            let config_path = args.config.as_deref().ok_or_else(|| {
                CliError::Usage("--provider needs --config to resolve the name".into())
            })?;
            let config = RunConfig::load(config_path)?;
            let entry = config.find_provider(name)?;
            let corpora = config.load_corpora()?;
            config.build_provider(entry, &corpora)?
        }
        (None, None) => {
            return Err(CliError::Usage("pick a generator: --mock <replies> or --provider <name> --config <file>".into()))
        }
    };

    let corpus = generate_corpus(&args.topic, provider.as_ref(), &options).map_err(|e| {
        let mut message = format!("generating corpus for `{}`: {e}", args.topic);
        if let SynthError::Generation { transcript, .. } = &e {
            message.push_str("\n--- generation transcript ---\n");
            message.push_str(transcript);
        }
        CliError::Runtime(message)
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
    }
    corpus
        .save(&args.out)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.out.display())))?;
    println!("wrote {} ({} sentences per side)", args.out.display(), args.sentences);

    match balance_audit(&corpus) {
        Ok(report) => print_balance(&report),
        Err(e) => println!("balance audit unavailable: {e}"),
    }
    Ok(0)
}

fn print_balance(report: &framealign::BalanceReport) {
    println!("balance audit:");
    for side in &report.sides {
        println!(
            "  {}: {} sentences, mean {:.1} chars, {:.1} tokens, word length {:.2}",
            side.label, side.count, side.mean_chars, side.mean_tokens, side.mean_word_len
        );
    }
    if report.flags.is_empty() {
        println!("  sides are balanced");
    }
    for flag in &report.flags {
        println!(
            "  imbalance: {} differs by {:.0}% ({:.2} vs {:.2})",
            flag.metric,
            flag.relative_gap * 100.0,
            flag.side_a,
            flag.side_b
        );
    }
}

/// Marker file name for one cell: a readable slug plus a short digest so
/// distinct keys can never collide after sanitization.
fn cell_file_name(key: &str) -> String {
    let mut slug = String::with_capacity(key.len());
    for c in key.chars() {
        if c.is_ascii_alphanumeric() || c == '=' || c == '.' {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.ends_with('-') {
            slug.push('-');
        }
    }
    let slug = slug.trim_matches('-');
    let digest = Sha256::digest(key.as_bytes());
    format!("{slug}-{:02x}{:02x}{:02x}{:02x}.json", digest[0], digest[1], digest[2], digest[3])
}

fn write_atomically(path: &Path, body: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, body)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Runtime(format!("renaming into {}: {e}", path.display())))
}

pub fn cmd_run(config_path: &Path, dry_run: bool) -> Result<i32, CliError> {
    if dry_run {
        return cmd_cost(config_path);
    }
    let config = RunConfig::load(config_path)?;
    let corpora = config.load_corpora()?;
    let topics: Vec<String> = corpora.keys().cloned().collect();
    let cells = config.cells(&topics)?;
    let word_vectors = config.load_word_vectors()?;
    let (models, _prices) = config.build_model_set(&corpora)?;
    let options = config.run_options();

    let cells_dir = config.output_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", cells_dir.display())))?;
    write_run_meta(&config, &options)?;

    let ctx = MatrixContext {
        corpora: &corpora,
        models: &models,
        word_vectors: word_vectors.as_ref(),
        options,
    };

    let total = cells.len();
    let mut ran = 0usize;
    let mut skipped = 0usize;
    let mut failed = 0usize;
    let mut spent = 0.0f64;
    for (i, spec) in cells.iter().enumerate() {
        let key = spec.key();
        let marker = cells_dir.join(cell_file_name(&key));
        if let Some(done) = load_completed(&marker) {
            skipped += 1;
            if done.error.is_some() {
                failed += 1;
            }
            println!("[{}/{total}] skip {key} (already complete)", i + 1);
            continue;
        }
        let result = run_cell(spec, &ctx);
        let body = serde_json::to_string_pretty(&result)
            .map_err(|e| CliError::Runtime(format!("serializing cell {key}: {e}")))?;
        write_atomically(&marker, &body)?;
        ran += 1;
        spent += result.ledger.cost;
        match (&result.error, &result.f1_a) {
            (Some(error), _) => {
                failed += 1;
                println!("[{}/{total}] failed {key}: {error}", i + 1);
            }
            (None, Some(f1)) => {
                let dropped = if result.failures > 0 {
                    format!(" ({} items failed)", result.failures)
                } else {
                    String::new()
                };
                println!(
                    "[{}/{total}] ok {key} f1={:.3} cost=${:.4}{dropped}",
                    i + 1,
                    f1.point,
                    result.ledger.cost
                );
            }
            (None, None) => {
                let dropped = if result.failures > 0 {
                    format!(" ({} items failed)", result.failures)
                } else {
                    String::new()
                };
                println!(
                    "[{}/{total}] ok {key} (no defined F1) cost=${:.4}{dropped}",
                    i + 1,
                    result.ledger.cost
                );
            }
        }
    }
    println!(
        "{total} cells: {ran} run, {skipped} skipped, {failed} failed; spent ${spent:.4} this invocation"
    );
    Ok(if failed > 0 { 1 } else { 0 })
}

/// A marker only counts as complete if it parses; torn or stale files are
/// treated as absent so an interrupted run repairs itself on rerun.
fn load_completed(marker: &Path) -> Option<CellResult> {
    let body = std::fs::read_to_string(marker).ok()?;
    serde_json::from_str(&body).ok()
}

fn write_run_meta(config: &RunConfig, options: &framealign::RunOptions) -> Result<(), CliError> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "version": format!("framealign {}", env!("CARGO_PKG_VERSION")),
        "started_unix": timestamp,
        "options": options,
        "config": config,
    });
    let path = config.output_dir.join("run_meta.json");
    let mut body = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Runtime(format!("serializing run metadata: {e}")))?;
    body.push('\n');
    std::fs::write(&path, body)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

pub fn cmd_report(cells_dir: &Path, out_dir: &Path) -> Result<i32, CliError> {
    let entries = std::fs::read_dir(cells_dir)
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", cells_dir.display())))?;
    let mut cells: Vec<CellResult> = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Runtime(format!("listing {}: {e}", cells_dir.display())))?
            .path();
        if path.extension().is_none_or(|ext| ext != "json") {
            continue;
        }
        let body = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))?;
        let cell: CellResult = serde_json::from_str(&body)
            .map_err(|e| CliError::Runtime(format!("parsing {}: {e}", path.display())))?;
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(CliError::Usage(format!(
            "no completed cells in {}; run the matrix first",
            cells_dir.display()
        )));
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", out_dir.display())))?;
    let outputs = [
        ("summary.csv", summary_csv(&cells)),
        ("plot_data.json", plot_data_json(&cells)),
        ("items.jsonl", items_jsonl(&cells)),
    ];
    for (name, body) in &outputs {
        let path = out_dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    println!("wrote summary.csv, plot_data.json, items.jsonl for {} cells to {}", cells.len(), out_dir.display());
    Ok(0)
}

pub fn cmd_cost(config_path: &Path) -> Result<i32, CliError> {
    let config = RunConfig::load(config_path)?;
    let corpora = config.load_corpora()?;
    let topics: Vec<String> = corpora.keys().cloned().collect();
    let cells = config.cells(&topics)?;
    // Prices come straight from the config — no provider is constructed and
    // nothing leaves this process.
    let prices: BTreeMap<String, framealign::ModelPrices> =
        config.providers.iter().map(|p| (p.name.clone(), p.prices())).collect();
    let options = config.run_options();

    let mut totals = CostLedger::default();
    let mut estimate_failures = 0usize;
    println!("cell,calls,input_tokens,output_tokens,cost");
    for spec in &cells {
        match estimate_cell_cost(spec, &corpora, &options, &prices) {
            Ok(ledger) => {
                println!(
                    "{},{},{},{},{:.6}",
                    spec.key(),
                    ledger.calls,
                    ledger.input_tokens,
                    ledger.output_tokens,
                    ledger.cost
                );
                totals.calls += ledger.calls;
                totals.input_tokens += ledger.input_tokens;
                totals.output_tokens += ledger.output_tokens;
                totals.cost += ledger.cost;
            }
            Err(e) => {
                estimate_failures += 1;
                println!("{},estimate failed: {e},,,", spec.key());
            }
        }
    }
    println!(
        "total,{},{},{},{:.6}",
        totals.calls, totals.input_tokens, totals.output_tokens, totals.cost
    );
    Ok(if estimate_failures > 0 { 1 } else { 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_file_names_are_distinct_and_readable() {
        let a = cell_file_name("paired/mock/dog ownership/k=1");
        let b = cell_file_name("paired/mock/dog-ownership/k=1");
        assert_ne!(a, b, "sanitized names must not collide");
        assert!(a.starts_with("paired-mock-dog-ownership-k=1-"), "{a}");
        assert!(a.ends_with(".json"));
    }

    #[test]
    fn marker_names_are_stable_across_calls() {
        let key = "prompt/gpt/immigration/zero_shot";
        assert_eq!(cell_file_name(key), cell_file_name(key));
    }
}
