//! Batch workflows over synthetic or external table corpora.
//!
//! Every command accepts either a corpus directory (one with a
//! `manifest.json`, as written by `synth`) together with a work directory, or
//! single files. Exit codes: 0 success, 1 I/O or format errors, 2 structure
//! errors.

pub mod commands;
pub mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "tablestruct", version, about = "Table structure recovery from cell boxes and pyramid maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of annotations and simulated predictions.
    Synth(SynthArgs),
    /// Write local and global training targets for annotations.
    Targets(TargetsArgs),
    /// Refine predicted boxes with their pyramid maps.
    Refine(RefineArgs),
    /// Recover the table grid from refined boxes.
    Recover(RecoverArgs),
    /// Score recovered grids against annotations.
    Eval(EvalArgs),
    /// Run targets, refine, recover and eval in order.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Corpus directory to create.
    #[arg(long)]
    pub output: PathBuf,
    /// Number of tables.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Master seed; member seeds are drawn from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub min_rows: u32,
    #[arg(long, default_value_t = 6)]
    pub max_rows: u32,
    #[arg(long, default_value_t = 2)]
    pub min_cols: u32,
    #[arg(long, default_value_t = 5)]
    pub max_cols: u32,
    /// Probability that a cell spans several rows or columns.
    #[arg(long, default_value_t = 0.15)]
    pub span_prob: f64,
    /// Probability that a cell is empty.
    #[arg(long, default_value_t = 0.15)]
    pub empty_prob: f64,
    /// Box side jitter as a fraction of the cell extent.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Uniform noise amplitude on pyramid maps.
    #[arg(long, default_value_t = 0.0)]
    pub pyr_noise: f64,
    /// Segmentation pixel flip probability.
    #[arg(long, default_value_t = 0.0)]
    pub flip_rate: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TargetsArgs {
    /// Corpus directory or annotation JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Work directory (corpus input) or target directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write every map as an 8-bit PGM image.
    #[arg(long)]
    pub pgm: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RefineOpts {
    /// Binarization threshold for the global segmentation map.
    #[arg(long, default_value_t = 0.5)]
    pub seg_threshold: f64,
    /// Refinement passes per box.
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Json,
    Html,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RecoverOpts {
    /// Foreground ratio a strip must exceed to merge two empty cells.
    #[arg(long, default_value_t = 0.5)]
    pub merge_ratio: f64,
    /// Grid output format; corpus runs always keep grid.json and add grid.html.
    #[arg(long, value_enum, default_value_t = GridFormat::Json)]
    pub format: GridFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalOpts {
    /// Minimum IoU for matching predicted to annotated cells.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RefineArgs {
    /// Corpus directory or prediction bundle JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Work directory (corpus input) or box-list JSON.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub opts: RefineOpts,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RecoverArgs {
    /// Corpus directory, box-list JSON or prediction bundle JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Work directory (corpus input) or grid file.
    #[arg(long)]
    pub output: PathBuf,
    /// Segmentation map for single-file input; defaults to the bundle's.
    #[arg(long)]
    pub seg: Option<PathBuf>,
    #[command(flatten)]
    pub opts: RecoverOpts,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Corpus directory or grid JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Work directory (corpus input) or score JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Annotation JSON for single-file input.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub opts: EvalOpts,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Corpus directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Work directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub pgm: bool,
    #[command(flatten)]
    pub refine: RefineOpts,
    #[command(flatten)]
    pub recover: RecoverOpts,
    #[command(flatten)]
    pub eval: EvalOpts,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

/// Runs one command and maps the outcome to a process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Targets(a) => commands::targets(a),
        Command::Refine(a) => commands::refine(a),
        Command::Recover(a) => commands::recover(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pipeline(a) => commands::pipeline(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
