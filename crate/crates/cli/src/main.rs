//! `govdag`: plan, run and score data-governance tasks, and build task
//! packs.
//!
//! Exit codes: 0 success, 1 task failures present, 2 configuration or usage
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use govdag_core::pipeline::{Ablation, Backend};
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(
    name = "govdag",
    version,
    about = "Contract-checked data-governance pipelines and their benchmark"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan one task and print its contract-checked DAG.
    Plan(PlanArgs),
    /// Run every task of a pack and score the results.
    Run(RunArgs),
    /// Benchmark construction and scoring.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Aggregate one run log, or compare two side by side.
    Report(ReportArgs),
    /// Operator library maintenance.
    #[command(subcommand)]
    Lib(LibCommand),
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Build a benchmark pack from a seed pack of clean ground truth.
    Build(BuildArgs),
    /// Score one prediction file against a task's ground truth.
    Eval(EvalArgs),
}

#[derive(Subcommand, Debug)]
enum LibCommand {
    /// Run every operator snippet on its sample task.
    Check(LibCheckArgs),
}

/// Model backend selection shared by every command that talks to a model.
#[derive(Args, Debug, Clone)]
struct BackendArgs {
    /// live, mock or replay.
    #[arg(long, default_value = "replay")]
    backend: Backend,
    /// Transcript root for replay; defaults to `<pack>/transcripts`.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Save every conversation under this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Model identifier sent to the backend.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    pack: PathBuf,
    #[arg(long)]
    task: String,
    #[command(flatten)]
    backend: BackendArgs,
    /// none, no_planner or no_rag; planning refuses no_planner.
    #[arg(long, default_value = "none")]
    ablate: Ablation,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    pack: PathBuf,
    /// Directory for run.jsonl, details.jsonl, report.json, report.md and outputs/.
    #[arg(long)]
    out: PathBuf,
    /// Run only these tasks (repeatable).
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value = "none")]
    ablate: Ablation,
    /// Debug iterations allowed per node.
    #[arg(long)]
    max_iter: Option<u32>,
    /// Library exemplars retrieved per node.
    #[arg(long)]
    k: Option<usize>,
    /// Tasks run concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Per-token prices; defaults to `<pack>/pricing.toml` when present.
    #[arg(long)]
    pricing: Option<PathBuf>,
    /// Sandbox wall-clock limit per script, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Seed pack holding tasks and their ground truth.
    #[arg(long)]
    pack: PathBuf,
    /// Empty or missing directory for the built pack.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pack: PathBuf,
    #[arg(long)]
    task: String,
    /// The file to score.
    prediction: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// One run log, or two to compare.
    #[arg(required = true, num_args = 1..=2)]
    logs: Vec<PathBuf>,
    /// Print JSON instead of a Markdown table (single log only).
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct LibCheckArgs {
    #[arg(long)]
    pack: PathBuf,
    /// Library directory; defaults to `<pack>/library`.
    #[arg(long)]
    library: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.verbose);
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code_for(&e)
        }
    }
}
