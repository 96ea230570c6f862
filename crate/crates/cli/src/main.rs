//! `qnlode`: map polynomial systems, run measurement-driven simulations and
//! analyze the resulting ensembles.

mod commands;
mod demo;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qnlode_core::quantum::MeasurementMode;

pub const OUT_ENV: &str = "QNLODE_OUT";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Pipeline(String),
    Simulation(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Pipeline(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Pipeline(_) => 2,
            CliError::Simulation(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Pipeline(m) => write!(f, "pipeline error: {m}"),
            CliError::Simulation(m) => write!(f, "simulation failure: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qnlode", version, about = "Quantum-inspired simulation of polynomial ODE systems")]
pub struct Cli {
    /// Worker threads for ensembles (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Map a polynomial system file to an observable-Hamiltonian artifact.
    Map(MapArgs),
    /// Simulate trajectories from an artifact.
    Simulate(SimulateArgs),
    /// Entropy and trace distance of an ensemble against a deterministic run.
    Analyze(AnalyzeArgs),
    /// Branch time as a function of the measurement rate.
    Sweep(SweepArgs),
    /// Built-in demonstrations.
    Demo(DemoArgs),
    /// Measurement and evolution counts for a run.
    Cost(CostArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MapFlags {
    /// Homogenizing constant x0.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Odd homogeneous degree; defaults to the smallest that fits.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Combine pairs with proportional Hamiltonians.
    #[arg(long)]
    pub merge_pairs: bool,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    pub system: PathBuf,
    #[command(flatten)]
    pub flags: MapFlags,
    /// Output directory (default: $QNLODE_OUT or ./qnlode-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Exact,
    Shot,
    Gaussian,
}

impl From<ModeArg> for MeasurementMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => MeasurementMode::Exact,
            ModeArg::Shot => MeasurementMode::Shot,
            ModeArg::Gaussian => MeasurementMode::Gaussian,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunFlags {
    /// Step in rescaled time t'.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final rescaled time t'.
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Measurements per unit time; m = s * dt.
    #[arg(long, conflicts_with = "m")]
    pub s: Option<f64>,
    /// Measurements per observable per step.
    #[arg(long)]
    pub m: Option<f64>,
    /// Ensemble size.
    #[arg(long = "K", short = 'K')]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps between recorded snapshots.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Artifact written by `map`.
    #[arg(required_unless_present = "manifest")]
    pub artifact: Option<PathBuf>,
    /// Initial condition, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required_unless_present = "manifest")]
    pub x0: Vec<f64>,
    #[command(flatten)]
    pub run: RunFlags,
    /// Repeat the run described by a manifest.
    #[arg(long, conflicts_with = "artifact")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Directory of trajectory_*.csv files.
    pub ensemble: PathBuf,
    /// Trajectory file of the exact-mode run.
    #[arg(long)]
    pub deterministic: PathBuf,
    /// Fraction of the maximum entropy that marks the branch point.
    #[arg(long, default_value_t = qnlode_core::analysis::DEFAULT_BRANCH_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub artifact: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Vec<f64>,
    /// Measurement rates to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub s_values: Vec<f64>,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long, default_value_t = qnlode_core::analysis::DEFAULT_BRANCH_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    Logistic,
    LorenzStable,
    LorenzChaotic,
}

#[derive(Args, Debug)]
#[command(after_help = demo::DEMO_HELP)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
    #[command(flatten)]
    pub map: MapFlags,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Print the cost of the published parameters instead of running.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    /// Number of observable-Hamiltonian pairs.
    #[arg(long, required_unless_present = "artifact")]
    pub pairs: Option<usize>,
    /// Take the pair count from an artifact.
    #[arg(long, conflicts_with = "pairs")]
    pub artifact: Option<PathBuf>,
    #[arg(long)]
    pub t_final: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long, conflicts_with = "m", required_unless_present = "m")]
    pub s: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Target accuracy; defaults to 1/m.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

pub fn out_dir(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qnlode-out"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let result = match &cli.command {
        Command::Map(a) => commands::map(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Demo(a) => demo::run(a),
        Command::Cost(a) => commands::cost(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qnlode: {e}");
            ExitCode::from(e.code())
        }
    }
}
