use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wplzx::masd::WindingModel;
use wplzx::{Preset, WeightMode};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(name = "wplzx", version, about = "Weighted ZX diagrams on quantized phase grids")]
pub struct Cli {
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded corpus of diagrams or circuits plus a manifest.
    Gen(GenArgs),
    /// Normalize a diagram or circuit with WZCC.
    Normalize(NormalizeArgs),
    /// Print the matrix (or output state) of a diagram or circuit as JSON.
    Evaluate(EvaluateArgs),
    /// Check that normalization preserves semantics.
    Verify(VerifyArgs),
    /// Compression and fidelity metrics as CSV.
    Metrics(MetricsArgs),
    /// Decode one defect graph at one or more λ.
    Decode(DecodeArgs),
    /// Surface-code logical error rate against λ.
    Sweep(SweepArgs),
    /// Curvature landscape over the anisotropy square.
    Curvature(CurvatureArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of instances.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid_orders: Option<Vec<u64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CircuitArgs {
    /// Grid orders assigned to qubits round-robin when a circuit is read.
    #[arg(long, value_delimiter = ',')]
    pub grid_orders: Option<Vec<u64>>,
    /// `raw` keeps circuit angles exact, `snapped` rounds them to the grid.
    #[arg(long)]
    pub phase_mode: Option<String>,
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the normalized diagram, summary and trace.
    #[arg(long)]
    pub out: PathBuf,
    /// Order fusions by the curvature potential instead of grid order.
    #[arg(long)]
    pub curvature: bool,
    /// Snap canonical angles to their grids (lossy).
    #[arg(long)]
    pub snap: bool,
    #[arg(long)]
    pub grid_cap: Option<u64>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Apply to |0…0⟩ and print the normalized state instead of the matrix.
    #[arg(long)]
    pub state: bool,
    #[arg(long)]
    pub max_open_wires: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Replay this trace instead of normalizing afresh.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_open_wires: Option<usize>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Generate instances in memory from this preset.
    #[arg(long, conflicts_with_all = ["manifest", "input"])]
    pub preset: Option<Preset>,
    /// Read instances listed in a `gen` manifest.
    #[arg(long, conflicts_with = "input")]
    pub manifest: Option<PathBuf>,
    /// Raw instances.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Optimized counterparts, paired with the raw instances by position.
    #[arg(long, num_args = 1..)]
    pub opt: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Measure fidelity between noisy runs of the raw and optimized circuits.
    #[arg(long, requires = "strength")]
    pub noise: Option<NoiseArg>,
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub circuit: CircuitArgs,
}

#[derive(clap::ValueEnum, Copy, Clone, Debug)]
pub enum NoiseArg {
    Depolarizing,
    AmplitudeDamping,
    PhaseDamping,
}

#[derive(Args, Debug, Clone)]
pub struct DecoderArgs {
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub mode: Option<WeightMode>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Insist on exact matching.
    #[arg(long, conflicts_with = "greedy")]
    pub exact: bool,
    /// Use the greedy matcher at any size.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub decoder: DecoderArgs,
    /// Code distance (3, 5 or 7).
    #[arg(long = "distance", visible_alias = "d")]
    pub distance: Option<usize>,
    /// Physical error rate.
    #[arg(long = "p-phys", visible_alias = "p")]
    pub p_phys: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `two-sector`, `uniform:A`, `constant:A:K` or a JSON object.
    #[arg(long, value_parser = config::parse_winding)]
    pub winding: Option<WindingModel>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    pub points: Option<usize>,
    /// Finite-difference step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
    Resource(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Domain(e) | Failure::Resource(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if commands::is_resource_cap(&e) {
            Failure::Resource(e)
        } else {
            Failure::Domain(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, 0) => log::LevelFilter::Warn,
        (_, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();

    let result = config::RunConfig::load(cli.config.as_deref())
        .map_err(Failure::Usage)
        .and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            if let Failure::Resource(_) = f {
                eprintln!("hint: the input exceeds a resource cap; shrink it or raise the matching limit");
            }
            ExitCode::from(f.code())
        }
    }
}
