//! `mrgg` command-line experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use commands::Context;
use config::ExperimentConfig;

pub const JOBS_ENV: &str = "MRGG_JOBS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, unreadable or malformed input, unwritable output.
    #[error("input error: {0}")]
    Input(String),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Pipeline(_) => ExitCode::from(1),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mrgg", version, about = "Markov random geometric graph experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a graph and write it as JSON.
    Simulate(Args),
    /// Estimate envelope and latitude functions from a graph file.
    Estimate(Args),
    /// Estimation error over a list of graph sizes.
    SweepDelta2(Args),
    /// Calibrate the Markov test and measure its rejection rates.
    TestPower(Args),
    /// Link prediction with oracle, plug-in and uniform posteriors.
    Linkpred(Args),
}

impl Command {
    pub fn args(&self) -> &Args {
        match self {
            Command::Simulate(a)
            | Command::Estimate(a)
            | Command::SweepDelta2(a)
            | Command::TestPower(a)
            | Command::Linkpred(a) => a,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `out` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. MRGG_JOBS takes precedence.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Thread count from `MRGG_JOBS`, else `--jobs`.
pub fn resolve_jobs(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    let jobs = match env {
        Some(v) => Some(v.trim().parse::<usize>().map_err(|_| CliError::Input(format!("{JOBS_ENV}={v} is not a count")))?),
        None => flag,
    };
    if jobs == Some(0) {
        return Err(CliError::Input("job count must be positive".into()));
    }
    Ok(jobs)
}

fn configure_jobs(flag: Option<usize>) -> Result<(), CliError> {
    let env = std::env::var(JOBS_ENV).ok();
    if let Some(k) = resolve_jobs(flag, env.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Pipeline(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs one command and returns the files it wrote.
pub fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    let args = command.args();
    configure_jobs(args.jobs)?;
    let (config, base) = ExperimentConfig::load(&args.config)?;
    let out_dir = match (&args.out, &config.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_absolute() => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => return Err(CliError::Input("no output directory: pass --out or set `out`".into())),
    };
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let ctx = Context { config, base, seed };
    let outputs = match command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Estimate(_) => commands::estimate(&ctx),
        Command::SweepDelta2(_) => commands::sweep(&ctx),
        Command::TestPower(_) => commands::power(&ctx),
        Command::Linkpred(_) => commands::linkpred(&ctx),
    }?;
    outputs.commit(&out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_flag() {
        assert_eq!(resolve_jobs(Some(4), Some("2")).unwrap(), Some(2));
        assert_eq!(resolve_jobs(Some(4), None).unwrap(), Some(4));
        assert_eq!(resolve_jobs(None, None).unwrap(), None);
        assert!(resolve_jobs(Some(4), Some("many")).is_err());
        assert!(resolve_jobs(Some(0), None).is_err());
    }

    #[test]
    fn parses_command_line() {
        let cli = Cli::try_parse_from(["mrgg", "sweep-delta2", "--config", "c.json", "--out", "o", "--seed", "5"]).unwrap();
        let a = cli.command.args();
        assert_eq!(a.seed, Some(5));
        assert!(matches!(cli.command, Command::SweepDelta2(_)));
        assert!(Cli::try_parse_from(["mrgg", "simulate"]).is_err());
    }
}
