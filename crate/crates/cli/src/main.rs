mod args;
mod commands;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use queuecap::capacity::CapacityError;
use queuecap::dist::DistError;
use queuecap::entmax::EntMaxError;
use queuecap::kkt::KktError;
use queuecap::queuesim::QueueError;

use args::{Cli, CliCommand, RunConfig};

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    TooLarge(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::TooLarge(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::TooLarge(m) => f.write_str(m),
        }
    }
}

impl From<DistError> for CliError {
    fn from(e: DistError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EntMaxError> for CliError {
    fn from(e: EntMaxError) -> Self {
        match e {
            EntMaxError::Dist(_) | EntMaxError::Invalid(_) => CliError::Config(e.to_string()),
            EntMaxError::TruncationInsufficient { .. } | EntMaxError::NoConvergence(_) => CliError::Numerical(e.to_string()),
            EntMaxError::InstanceTooLarge(_) => CliError::TooLarge(e.to_string()),
        }
    }
}

impl From<CapacityError> for CliError {
    fn from(e: CapacityError) -> Self {
        match e {
            CapacityError::Dist(d) => d.into(),
            CapacityError::Solver(s) => s.into(),
            CapacityError::BadGrid => CliError::Config(e.to_string()),
        }
    }
}

impl From<KktError> for CliError {
    fn from(e: KktError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<QueueError> for CliError {
    fn from(e: QueueError) -> Self {
        match e {
            QueueError::InstanceTooLarge(_) => CliError::TooLarge(e.to_string()),
            QueueError::CausalityViolation { .. } | QueueError::NonMonotoneArrival { .. } => {
                CliError::Numerical(e.to_string())
            }
            QueueError::TooFewSamples { .. } | QueueError::Invalid(_) => CliError::Config(e.to_string()),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut options = match &cli.options {
        Some(p) => read_json(p, "options file")?,
        None => Default::default(),
    };
    let mut out = cli.out;
    let mut seed = cli.seed;
    let command = match cli.command {
        CliCommand::Run(c) => c,
        CliCommand::Config { path } => {
            let cfg: RunConfig = read_json(&path, "run config")?;
            if cfg.version != 1 {
                return Err(CliError::Config(format!("version: unsupported run config version {}", cfg.version)));
            }
            options = cfg.options.unwrap_or(options);
            out = cfg.out.or(out);
            seed = cfg.seed.or(seed);
            cfg.command
        }
    };
    let ctx = commands::Context { options, out, seed: seed.unwrap_or(0) };
    commands::dispatch(&ctx, &command)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("queuecap: {e}");
            ExitCode::from(e.code())
        }
    }
}
