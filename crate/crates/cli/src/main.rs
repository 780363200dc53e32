use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gamegap::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use gamegap::GameError;

#[derive(Parser)]
#[command(name = "gamegap", version, about = "Equilibrium gaps of N-player differential games on networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monotonicity constants, interaction strengths and graph statistics.
    Check(RunArgs),
    /// Solve one game and simulate its equilibria on shared noise.
    Solve(RunArgs),
    /// Closed-loop / open-loop / distributed / mean-field gap sweep over N.
    Gap(RunArgs),
    /// Network-vs-mean-field universality sweep over N.
    Universality(RunArgs),
    /// Joint vanishing-viscosity and large-N sweep.
    Viscosity(RunArgs),
    /// Weighted empirical-measure convergence rate.
    Fgrate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Output directory for CSV tables and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths (or repetitions).
    #[arg(long)]
    paths: Option<usize>,
    /// Number of time steps.
    #[arg(long)]
    steps: Option<usize>,
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), GameError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| GameError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if config.experiment != kind {
        return Err(GameError::Config(format!(
            "{} holds a {} configuration, not {}",
            args.config.display(),
            config.experiment.as_str(),
            kind.as_str()
        )));
    }
    config.apply_overrides(args.seed, args.paths, args.steps);
    let output = run_experiment(&config)?;
    print!("{}", output.text);
    if let Some(dir) = &args.out {
        output.write_to(dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Check(a) => (ExperimentKind::Check, a),
        Command::Solve(a) => (ExperimentKind::Solve, a),
        Command::Gap(a) => (ExperimentKind::Gap, a),
        Command::Universality(a) => (ExperimentKind::Universality, a),
        Command::Viscosity(a) => (ExperimentKind::Viscosity, a),
        Command::Fgrate(a) => (ExperimentKind::Fgrate, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
