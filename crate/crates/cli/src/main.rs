use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use stars_isac_cli::{
    cmd_compare_baseline, cmd_run, cmd_sweep, cmd_validate, Axis, CliError, Common, ImplChoice, PhaseChoice,
    RangeSpec, VALIDATE_SNR,
};

/// Sensing-at-STARS ISAC experiments.
///
/// Exit status: 0 when every optimized phase meets its QoS targets, 2 when
/// some phase does not, 1 on any error. `STARS_ISAC_THREADS` caps the worker
/// threads.
#[derive(Parser)]
#[command(name = "stars-isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON; omitted fields (or the whole file) take the default scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; a JSON companion is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario's element implementation.
    #[arg(long = "impl", value_enum)]
    implementation: Option<ImplChoice>,
    #[arg(long, value_enum, default_value_t = PhaseChoice::Both)]
    phase: PhaseChoice,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common {
            scenario: a.scenario,
            seed: a.seed,
            out: a.out,
            implementation: a.implementation,
            phase: a.phase,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every scheduled phase of a scenario.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Also optimize the dual-RIS baseline.
        #[arg(long)]
        baseline: bool,
    },
    /// One optimization per sweep point and phase.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Inclusive `start:stop:step`, power in dBm.
        #[arg(long)]
        range: String,
        #[arg(long)]
        baseline: bool,
    },
    /// STARS against the dual-RIS baseline on identical channels.
    CompareBaseline {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Root-CRB against MUSIC RMSE over a sweep of the echo SNR.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Per-element echo SNR points in dB, `start:stop:step`.
        #[arg(long, default_value = VALIDATE_SNR)]
        range: String,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("STARS_ISAC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("STARS_ISAC_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run { common, baseline } => Ok(cmd_run(&common.into(), baseline)?.exit_code()),
        Command::Sweep {
            common,
            axis,
            range,
            baseline,
        } => {
            let range: RangeSpec = range.parse()?;
            Ok(cmd_sweep(&common.into(), axis, range, baseline)?.exit_code())
        }
        Command::CompareBaseline { common } => Ok(cmd_compare_baseline(&common.into())?.exit_code()),
        Command::Validate { common, trials, range } => {
            cmd_validate(&common.into(), trials, range.parse()?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
