use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use carleman_wave_lab::config::{Command, ExperimentConfig};
use carleman_wave_lab::runner::{self, RunArtifacts};
use carleman_wave_lab::{Error, Result};

/// Numerical laboratory for weighted energy estimates of a stochastic wave
/// equation: weight certification, multiplier-identity verification, SPDE
/// simulation, and boundary observability experiments, all driven by a
/// single TOML configuration.
///
/// Exit codes: 0 success, 2 configuration or validation failure, 3 failed
/// acceptance check (convergence, positivity, observability, blow-up),
/// 4 weight saturation.
#[derive(Parser)]
#[command(name = "carleman-wave-lab", version)]
struct Cli {
    /// One of: verify-identity, certify-weights, simulate, carleman,
    /// observability, sweep.
    command: String,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Replace the configured random seed (takes precedence over the
    /// CWL_SEED environment variable).
    #[arg(long)]
    seed: Option<u64>,

    /// Replace the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(art) => {
            println!("{}", art.headline);
            if art.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e))
        }
    }
}

fn execute(cli: &Cli) -> Result<RunArtifacts> {
    let command: Command = cli.command.parse()?;
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    let out = cli.out.as_ref().map(|p| p.to_string_lossy().into_owned());
    cfg.apply_overrides(seed, out.as_deref());
    runner::run(&cfg, command)
}

/// Seed from the CWL_SEED environment variable; sits between the config
/// value and the --seed flag in precedence.
fn env_seed() -> Result<Option<u64>> {
    match std::env::var("CWL_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("CWL_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
