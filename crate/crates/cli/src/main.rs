//! `fcusum`: fit forecasters, calibrate thresholds, monitor forecast-error
//! streams and run simulation cells.
//!
//! Exit status: 0 no alarm, 2 alarm, 1 error (including usage errors).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fcusum", version, about = "Sequential CUSUM monitoring of forecast errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate critical constants and write a JSON table.
    Calibrate(CalibrateArgs),
    /// Fit a forecaster on the training prefix and emit its error stream.
    Fit(FitArgs),
    /// Monitor a forecast-error (or raw) stream.
    Monitor(MonitorArgs),
    /// Run a simulation scenario for one or more methods.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Training size in observations.
    #[arg(long, conflicts_with = "train_frac")]
    m: Option<usize>,
    /// Training size as a fraction of the series length.
    #[arg(long)]
    train_frac: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0")]
    gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = forecast_cusum::calibration::DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = forecast_cusum::calibration::DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = forecast_cusum::calibration::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Arma,
    EtsAnn,
    EtsAan,
    EtsAna,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "value")]
    column: String,
    #[arg(long, default_value_t = 1)]
    frequency: usize,
    #[arg(long, value_enum, default_value = "arma")]
    model: ModelArg,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 2)]
    max_p: usize,
    #[arg(long, default_value_t = 2)]
    max_q: usize,
    /// Add a linear trend regressor (ARMA only).
    #[arg(long)]
    trend: bool,
    /// Add a multiplicative seasonal AR(1) factor at the series frequency (ARMA only).
    #[arg(long)]
    seasonal_ar: bool,
    /// Model JSON output.
    #[arg(long)]
    output: PathBuf,
    /// Error-stream CSV output.
    #[arg(long)]
    errors: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Mean,
    Variance,
    Both,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "error")]
    column: String,
    /// Column of calendar labels reported with the stopping time.
    #[arg(long)]
    timestamp_column: Option<String>,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    /// Treat the input as raw data (Bartlett long-run variance scale).
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Critical-value table; defaults to the shipped table.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Step-log CSV. With `--kind both`, `.mean`/`.variance` is inserted
    /// before the extension.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    RawCusum,
    Arma,
    Ets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKindArg {
    Mean,
    Variance,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_value = "raw-cusum,arma")]
    methods: Vec<MethodArg>,
    /// Detector; defaults to the one matched to the scenario's change.
    #[arg(long, value_enum)]
    kind: Option<SimKindArg>,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Results CSV; a JSON sidecar with per-replicate records is written next to it.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Monitor(a) => commands::monitor(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match outcome {
        Ok(commands::Outcome::NoAlarm) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Alarm) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
