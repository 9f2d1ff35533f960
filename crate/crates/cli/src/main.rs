//! Batch front end over the voxnt toolkit: offset-field extraction, scale
//! statistics, label refinement, occupancy evaluation, fixture synthesis
//! and throughput benchmarking.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 partial data
//! failure (some inputs failed; diagnostics on stderr). Data outputs are
//! byte-deterministic across runs and worker counts; timings go to stderr.

mod commands;
mod config;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// A command failure carrying its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn partial(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::usage(format!("{e:#}"))
    }
}

#[derive(Parser)]
#[command(name = "voxnt", version, about = "Voxel label toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON job config; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid extents X,Y,Z for raw inputs.
    #[arg(long, global = true)]
    dims: Option<String>,
    /// Axis nesting of raw payloads, slowest to fastest (default xyz).
    #[arg(long = "axis-order", global = true)]
    axis_order: Option<String>,
    /// Output grid format: raw | container.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Semantic class count including the empty class.
    #[arg(long = "num-classes", global = true)]
    num_classes: Option<u16>,
    /// Worker count; defaults to VOXNT_WORKERS, then the machine.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (or file, for eval).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit line-delimited JSON reports.
    #[arg(long, global = true)]
    jsonl: bool,
}

#[derive(Args)]
struct OffsetsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input grids: paths or glob patterns.
    inputs: Vec<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    inputs: Vec<String>,
    /// Histogram bin count.
    #[arg(long)]
    bins: Option<usize>,
    /// Whether the empty class participates in statistics.
    #[arg(long = "include-empty")]
    include_empty: Option<bool>,
    /// Tally one sample per run instead of per voxel.
    #[arg(long = "per-run")]
    per_run: bool,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    common: CommonArgs,
    inputs: Vec<String>,
    /// Minimum-scale thresholds a,b,c per axis.
    #[arg(long)]
    kmin: Option<String>,
    /// Maximum-scale thresholds a,b,c per axis; `off` disables an axis.
    #[arg(long)]
    kmax: Option<String>,
    /// Classes to rewrite, comma separated.
    #[arg(long = "target-class")]
    target_class: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Ground-truth grids: path, directory or glob.
    #[arg(long)]
    truth: Option<String>,
    /// Predicted grids, paired with truth in sorted order.
    #[arg(long)]
    pred: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scene spec JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fixture seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Timing repetitions; the best run counts.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute six-direction boundary offset fields from label grids.
    Offsets(OffsetsArgs),
    /// Export per-class instance scale histograms.
    Stats(StatsArgs),
    /// Rewrite anomalous target-class voxels to the ignore label.
    Refine(RefineArgs),
    /// Evaluate predictions: occupancy IoU, per-class IoU, mIoU.
    Eval(EvalArgs),
    /// Rasterize a synthetic scene spec into a grid plus manifest.
    Synth(SynthArgs),
    /// Time the offset scans against the naive walking oracle.
    Bench(BenchArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Offsets(args) => commands::offsets::run(args),
        Command::Stats(args) => commands::stats::run(args),
        Command::Refine(args) => commands::refine::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Bench(args) => commands::bench::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
