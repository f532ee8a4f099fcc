//! `qhdalm` command-line entry point.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "qhdalm",
    version,
    about = "Augmented Lagrangian solver with QHD and SB sampling"
)]
struct Cli {
    /// Worker threads for sampling and refinement (0 = one per core).
    #[arg(long, global = true, env = "QHDALM_THREADS", default_value_t = 0)]
    threads: usize,
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write a JSON report.
    Solve(SolveArgs),
    /// Run simulated bifurcation on an edge-list Ising model.
    SbBench(SbBenchArgs),
    /// Evolve a dense QHD wavefunction and dump observables.
    QhdDemo(QhdDemoArgs),
    /// Solve the electrolyzer scheduling problem.
    Hydrogen(HydrogenArgs),
    /// Regenerate a benchmark comparison table.
    MakeTables(MakeTablesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerArg {
    Auto,
    QhdDense,
    Sb,
    Random,
}

/// Overrides applied on top of `--config`.
#[derive(Debug, Args)]
struct SolverFlags {
    /// Solver configuration JSON; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Levels per variable for the SB encoding.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long)]
    tol_stat: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Clip inequality multipliers at zero after each update.
    #[arg(long)]
    project_mu: bool,
    /// Wall-clock limit in seconds. Runs that hit it are not reproducible.
    #[arg(long)]
    time_budget: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Problem JSON.
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    /// Single-start baseline (random candidates only) instead of QHD-ALM.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Per-iteration CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SbBenchArgs {
    /// Edge-list Ising file.
    #[arg(long)]
    ising: PathBuf,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    kerr: Option<f64>,
    #[arg(long)]
    detuning: Option<f64>,
    #[arg(long)]
    xi0: Option<f64>,
    #[arg(long)]
    pump_start: Option<f64>,
    #[arg(long)]
    pump_end: Option<f64>,
    #[arg(long)]
    init_amplitude: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON result; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best-replica position trajectory CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Integration steps between trajectory rows.
    #[arg(long, default_value_t = 10)]
    trajectory_every: usize,
}

#[derive(Debug, Args)]
struct QhdDemoArgs {
    /// Box-constrained problem JSON with at most 3 variables; defaults to
    /// (x - 0.7)^2 on [0, 1].
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    points: usize,
    #[arg(long, default_value_t = 10.0)]
    time: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Factor by which the schedule trades kinetic for potential weight.
    #[arg(long, default_value_t = 1000.0)]
    ratio: f64,
    /// Steps between observable rows.
    #[arg(long, default_value_t = 10)]
    every: usize,
    #[arg(long, default_value = "qhd_observables.csv")]
    observables: PathBuf,
    #[arg(long, default_value = "qhd_distribution.csv")]
    distribution: PathBuf,
    /// JSON summary; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HydrogenMethod {
    QhdAlm,
    Alm,
    Multistart,
}

#[derive(Debug, Args)]
struct HydrogenArgs {
    /// Parameter JSON.
    #[arg(long)]
    params: PathBuf,
    /// Number of slots; defaults to the length of the price series.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "qhd-alm")]
    method: HydrogenMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Starts for `--method multistart`.
    #[arg(long, default_value_t = 64)]
    starts: usize,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Per-slot schedule CSV; defaults to the report path with a
    /// `.schedule.csv` extension.
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Small,
}

#[derive(Debug, Args)]
struct MakeTablesArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// CSV table; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::runtime(format!("could not start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::SbBench(a) => commands::sb_bench(a),
        Command::QhdDemo(a) => commands::qhd_demo(a),
        Command::Hydrogen(a) => commands::hydrogen(a),
        Command::MakeTables(a) => commands::make_tables(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            CliError::input("usage", e.to_string().trim()).emit();
            return ExitCode::from(3);
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            e.emit();
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
