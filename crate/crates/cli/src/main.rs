//! `maxrect`: maximal fields, weak-type sweeps, rectangle coverings and
//! dilation experiments on integer lattices.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "maxrect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a maximal field and write it in .grid format.
    Maxfield(MaxfieldArgs),
    /// Sweep levels and record the weak-type score with covering diagnostics.
    Weaktype(WeaktypeArgs),
    /// Run the half-overlap selection on a rectangle list and verify it.
    Covering(CoveringArgs),
    /// Ratio of norms for cube indicators of several sides.
    Scaling(ScalingArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

/// Input function: a .grid file or a synthetic recipe.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Grid file to read.
    #[arg(long, conflicts_with = "synth")]
    pub grid: Option<PathBuf>,
    /// Synthetic input: uniform, sparse:<density> or cube:<side>.
    #[arg(long, requires = "extents")]
    pub synth: Option<String>,
    /// Lattice extents for synthetic inputs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub extents: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    /// zero, heisenberg:<mu> or file:<path>.
    #[arg(long, default_value = "zero")]
    pub shear: String,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// all, dyadic-sides or dyadic. Defaults by lattice size.
    #[arg(long)]
    pub family: Option<String>,
    /// torus or zero.
    #[arg(long, default_value = "torus")]
    pub boundary: String,
}

#[derive(Debug, Args)]
pub struct MaxfieldArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub op: OperatorArgs,
    /// Output .grid path; a .csv summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WeaktypeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub op: OperatorArgs,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long, default_value_t = maxrect::experiments::DEFAULT_LAMBDA_COUNT)]
    pub lambda_count: usize,
    /// Scan order of the witness boxes: given or volume-desc.
    #[arg(long, default_value = "volume-desc")]
    pub order: String,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoveringArgs {
    /// Rectangle list in .rects format.
    #[arg(long, conflicts_with = "random")]
    pub rects: Option<PathBuf>,
    /// Generate this many random rectangles instead of reading a file.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lattice extents, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub extents: Vec<usize>,
    /// given or volume-desc.
    #[arg(long, default_value = "given")]
    pub order: String,
    /// Exponents for the overlap norm, comma separated.
    #[arg(long = "p", value_delimiter = ',', default_values_t = [1.5, 2.0, 3.0])]
    pub ps: Vec<f64>,
    /// Per-rectangle CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV path (stdout when omitted).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Lattice extents, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub extents: Vec<usize>,
    /// Cube sides, powers of two.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub op: OperatorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = maxrect::verify::SuiteConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub side_2d: usize,
    #[arg(long, default_value_t = 6)]
    pub side_3d: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Deliberately break the build under test: strict-tie or no-wrap.
    #[arg(long, value_delimiter = ',')]
    pub inject_fault: Vec<String>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MAXRECT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("MAXRECT_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Maxfield(args) => commands::maxfield(args),
        Command::Weaktype(args) => commands::weaktype(args),
        Command::Covering(args) => commands::covering(args),
        Command::Scaling(args) => commands::scaling(args),
        Command::Verify(args) => commands::verify(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maxrect: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
