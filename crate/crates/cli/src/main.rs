use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ifdelay_cli::{check_reproduction, run_experiment, ConfigError, Dataset, ExperimentConfig, Kind};

/// Delay bounds and queue simulations for fading links with interference.
#[derive(Parser)]
#[command(name = "ifdelay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective capacity against s, with and without interference.
    EffectiveCapacity(RunArgs),
    /// Delay bound and simulated delay against the violation probability.
    DelayVsEpsilon(RunArgs),
    /// Delay bound and simulated delay against the arrival rate.
    DelayVsRate(RunArgs),
    /// Delay bound against the number of interferers.
    DelayVsInterferers(RunArgs),
    /// Maximum sustainable rate against average SNR.
    MaxrateVsSnr(RunArgs),
    /// Average capacity against average SNR.
    AvgcapVsSnr(RunArgs),
    /// Analytic violation probability next to simulated frequencies.
    Validate(RunArgs),
    /// Check the ordering claims of an emitted CSV.
    Check {
        csv: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overriding the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated slots per configuration; 0 skips optional simulation.
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Run the ordering checks on the result.
    #[arg(long)]
    check: bool,
}

enum Failure {
    Config(ConfigError),
    Other(String),
    Check,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { csv } => check_file(&csv),
        Command::EffectiveCapacity(a) => run(Kind::EffectiveCapacity, a),
        Command::DelayVsEpsilon(a) => run(Kind::DelayVsEpsilon, a),
        Command::DelayVsRate(a) => run(Kind::DelayVsRate, a),
        Command::DelayVsInterferers(a) => run(Kind::DelayVsInterferers, a),
        Command::MaxrateVsSnr(a) => run(Kind::MaxrateVsSnr, a),
        Command::AvgcapVsSnr(a) => run(Kind::AvgcapVsSnr, a),
        Command::Validate(a) => run(Kind::Validate, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Check) => ExitCode::FAILURE,
    }
}

fn load(kind: Kind, args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(kind, path)?,
        None => ExperimentConfig::preset(kind),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(slots) = args.slots {
        config.simulation.slots = slots;
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    if args.out.is_some() {
        config.output = args.out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(kind: Kind, args: RunArgs) -> Result<(), Failure> {
    let config = load(kind, &args).map_err(Failure::Config)?;
    let start = Instant::now();
    let data = run_experiment(&config)?;
    log::info!("{kind}: {} rows in {:.1?}", data.rows.len(), start.elapsed());
    match &config.output {
        Some(path) => data.write_file(path)?,
        None => data.write_to(std::io::stdout().lock())?,
    }
    if args.check {
        report(&data)?;
    }
    Ok(())
}

fn check_file(path: &Path) -> Result<(), Failure> {
    let data = Dataset::read_file(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    report(&data)
}

fn report(data: &Dataset) -> Result<(), Failure> {
    let report = check_reproduction(data)?;
    eprintln!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
