//! Command-line argument surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "elens",
    about = "Determinantal point processes through extended L-ensembles: sampling, diagnostics, verification",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw subsets from a model built from a point cloud.
    Sample(SampleArgs),
    /// Emit the pair repulsion table (i, j, distance, rho) for an anchor.
    Repulsion(RepulsionArgs),
    /// Emit the size distribution P(|X| = m) as CSV.
    SizeDist(SizeDistArgs),
    /// Sample root sets of the spanning-forest process on a graph.
    Forest(ForestArgs),
    /// Run the full verification battery on randomized small instances.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelKind {
    /// Distance-power kernel (conditionally positive definite).
    Distance,
    /// Gaussian kernel (plain L-ensemble).
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerKind {
    /// Exact sampling through the spectral mixture.
    Exact,
    /// Exact sampling through a low-rank factor (Gaussian kernel only).
    Lowrank,
    /// Approximate MCMC sampling with up-down or swap moves.
    Gibbs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

/// Ground set and kernel selection shared by the model-driven commands.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// CSV file of points (header x1..xd, one point per row).
    #[arg(long, conflicts_with = "generate_gaussian")]
    pub points: Option<PathBuf>,

    /// Generate a standard Gaussian cloud: N points in D dimensions.
    #[arg(long, num_args = 2, value_names = ["N", "D"])]
    pub generate_gaussian: Option<Vec<usize>>,

    /// Kernel family.
    #[arg(long, value_enum, default_value_t = KernelKind::Distance)]
    pub kernel: KernelKind,

    /// Distance exponent for the distance kernel (> 0, not an even integer).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    /// Lengthscale for the Gaussian kernel.
    #[arg(long, default_value_t = 1.0)]
    pub lengthscale: f64,

    /// Kernel magnitude. Mutually exclusive with --target-size.
    #[arg(long, conflicts_with = "target_size")]
    pub gamma: Option<f64>,

    /// Calibrate the kernel magnitude so the expected sample size matches.
    #[arg(long)]
    pub target_size: Option<f64>,

    /// Master seed for cloud generation and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Condition every draw on this exact size. Default: varying size.
    #[arg(long, conflicts_with = "varying")]
    pub fixed_size: Option<usize>,

    /// Varying-size sampling (the default).
    #[arg(long)]
    pub varying: bool,

    /// Number of recorded draws.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,

    #[arg(long, value_enum, default_value_t = SamplerKind::Exact)]
    pub sampler: SamplerKind,

    /// Gibbs burn-in, in sweeps of n proposals.
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,

    /// Gibbs sweeps between recorded draws.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,

    /// Output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = FileFormat::Jsonl)]
    pub format: FileFormat,
}

#[derive(Debug, Args)]
pub struct RepulsionArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Anchor index i (default: the point nearest the centroid).
    #[arg(long)]
    pub anchor: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SizeDistArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    /// Whitespace edge list with 0-based vertices: `u v [weight]`.
    #[arg(long)]
    pub graph: PathBuf,

    /// Forest parameter q > 0.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,

    #[arg(long, default_value_t = 100)]
    pub draws: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = FileFormat::Jsonl)]
    pub format: FileFormat,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = elens::verify::DEFAULT_SEED)]
    pub seed: u64,

    /// Run only the named checks (repeatable); default is the full battery.
    #[arg(long)]
    pub only: Vec<String>,

    /// Corrupt one validation input to demonstrate the failure path.
    #[arg(long, hide = true)]
    pub inject_asymmetric: bool,
}
