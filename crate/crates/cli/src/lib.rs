//! The `affbench` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 comparison outside tolerance.

mod commands;
mod config;
mod plotdata;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "affbench",
    version,
    about = "Affordance segmentation benchmark tools",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one model's stored predictions over a manifest.
    Evaluate(EvaluateArgs),
    /// Evaluate one model at several zoom factors.
    Sweep(SweepArgs),
    /// Write a zoom-perturbed copy of a dataset.
    Perturb(PerturbArgs),
    /// Object occupancy of the annotations, optionally after zooming.
    Occupancy(OccupancyArgs),
    /// Write seeded augmented copies of a dataset.
    Augment(AugmentArgs),
    /// Compare a report against published reference values.
    Compare(CompareArgs),
    /// Emit the numeric series behind bar, whisker and curve plots as CSV.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Dataset {
    /// JSON Lines manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Taxonomy file, or a built-in name (umd, choc-aff).
    #[arg(long)]
    pub taxonomy: String,
}

#[derive(Debug, Args)]
pub struct Jobs {
    /// Worker threads [default: available parallelism].
    #[arg(long, env = "AFFBENCH_JOBS", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: from the --out extension, else json].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Comma-separated metric families: jaccard, wfb.
    #[arg(long, default_value = "jaccard,wfb")]
    pub metrics: String,
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 3)]
    pub kernel_radius: usize,
    /// Background decay constant [default: ln(0.5)/5].
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub dataset: Dataset,
    /// Prediction key in the manifest.
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub output: Output,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: Dataset,
    #[arg(long)]
    pub model: String,
    /// Zoom factors; fractions such as 2/3 are accepted.
    #[arg(long, value_delimiter = ',', default_value = "0.5,2/3,1,1.5,2")]
    pub factors: Vec<String>,
    /// `FACTOR=MANIFEST` pairs with predictions made on perturbed images.
    /// Without them the stored predictions are perturbed with the annotations.
    #[arg(long = "factor-manifest", value_delimiter = ',')]
    pub factor_manifests: Vec<String>,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[command(flatten)]
    pub output: Output,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub dataset: Dataset,
    #[arg(long)]
    pub factor: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct OccupancyArgs {
    #[command(flatten)]
    pub dataset: Dataset,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub factors: Vec<String>,
    #[command(flatten)]
    pub output: Output,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub dataset: Dataset,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Built-in recipe: umd_ours, choc_aff or identity.
    #[arg(long, default_value = "umd_ours", conflicts_with = "augment_config")]
    pub preset: String,
    /// Recipe file overriding --preset.
    #[arg(long)]
    pub augment_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    #[command(flatten)]
    pub jobs: Jobs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    /// Reference values document.
    #[arg(long)]
    pub reference: PathBuf,
    /// Largest accepted |ours − reference|, percentage points.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Per-class values of one metric, one row per (input, class).
    Bars,
    /// Occupancy five-number summaries per factor.
    Whiskers,
    /// Average metric per factor.
    Curve,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Reports (bars), sweeps (curve) or sweeps/occupancy files (whiskers).
    #[arg(long, value_delimiter = ',', required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = "jaccard")]
    pub metric: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command failed, mapped onto the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Tolerance(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Tolerance(_) => EXIT_TOLERANCE,
        }
    }
}

impl From<affbench_core::Error> for Failure {
    fn from(e: affbench_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

/// The error and its causes, leaving out causes already spelled out by
/// the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Data(e) => eprintln!("error: {}", describe(e)),
                Failure::Tolerance(m) => eprintln!("{m}"),
            }
            f.exit_code()
        }
    }
}
