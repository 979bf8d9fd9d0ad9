use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noisefield::commands;
use noisefield::config::{EstimatorConfig, ScenarioConfig};

/// Synthesize classical stochastic drives for qubit trajectories and
/// verify that their path average reproduces the reference evolution.
#[derive(Parser)]
#[command(name = "noisefield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the comparison tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the reference trajectory on the configured grid.
    Validate,
    /// Export per-path drive fields.
    Synthesize,
    /// Run the estimator and compare against the reference.
    Simulate,
    /// Run the estimator across a parameter range.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, noisefield::Error> {
    let path = cli.config.as_ref().ok_or_else(|| {
        noisefield::Error::Usage("--config <path> is required".into())
    })?;
    let mut config = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        if let EstimatorConfig::Mc { seed: s, .. } = &mut config.estimator {
            *s = seed;
        }
    }
    if let Some(tol) = cli.tol {
        config.tolerance = tol;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool, noisefield::Error> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Validate => commands::cmd_validate(&config, &cli.out),
        Command::Synthesize => commands::cmd_synthesize(&config, &cli.out).map(|_| true),
        Command::Simulate => commands::cmd_simulate(&config, &cli.out),
        Command::Sweep => commands::cmd_sweep(&config, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("noisefield: checks failed (see manifest in {})", cli.out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("noisefield: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
