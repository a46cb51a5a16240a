//! `framealign` — detects which side of a contested issue a text leans
//! toward by comparing paired language-model completions, and benchmarks
//! that detector against prompt-based and trained classifiers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{cmd_cost, cmd_report, cmd_run, cmd_synthgen, SynthgenArgs};

#[derive(Parser)]
#[command(name = "framealign", version, about = "Issue-framing detection via paired completions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-sided corpus for a topic.
    Synthgen {
        /// Contested issue to write about, e.g. "dog ownership".
        #[arg(long)]
        topic: String,
        /// Where to write the corpus JSON.
        #[arg(long)]
        out: PathBuf,
        /// Generate offline from a scripted reply file instead of a model.
        #[arg(long, value_name = "REPLIES_JSON")]
        mock: Option<PathBuf>,
        /// Provider name from --config to generate with.
        #[arg(long)]
        provider: Option<String>,
        /// Config file that defines --provider.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bulk sentences per side.
        #[arg(long, default_value_t = 50)]
        sentences: usize,
        /// Sampling temperature for every generation call.
        #[arg(long, default_value_t = 0.5)]
        temperature: f64,
    },
    /// Run the configured experiment matrix; completed cells are skipped.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Estimate calls and cost, then exit without any network traffic.
        #[arg(long)]
        dry_run: bool,
    },
    /// Build summary.csv, plot_data.json, and items.jsonl from cell records.
    Report {
        /// Directory of per-cell JSON records (output_dir/cells).
        #[arg(long)]
        cells: PathBuf,
        /// Directory to write the report artifacts into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate calls and cost for a config without running anything.
    Cost {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synthgen { topic, out, mock, provider, config, sentences, temperature } => {
            cmd_synthgen(&SynthgenArgs { topic, out, mock, provider, config, sentences, temperature })
        }
        Command::Run { config, dry_run } => cmd_run(&config, dry_run),
        Command::Report { cells, out } => cmd_report(&cells, &out),
        Command::Cost { config } => cmd_cost(&config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
