//! Command-line and config-file arguments. Every subcommand's arguments are
//! also its JSON schema inside a run config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use queuecap::dist::{ServiceSpec, Tau};
use queuecap::entmax::SolverOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "queuecap", version, about = "Capacity bounds for FIFO queue timing channels with feedback")]
pub struct Cli {
    /// JSON file of solver options.
    #[arg(long, env = "QUEUECAP_OPTIONS", global = true)]
    pub options: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    #[command(flatten)]
    Run(Command),
    /// Execute a JSON run config.
    Config {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve one entropy-maximization program.
    Solve(SolveArgs),
    /// Capacity curves over a rate grid.
    Sweep(SweepArgs),
    /// Strict-gap verdict between full feedback and the τ bound.
    Gap(GapArgs),
    /// Stationarity residuals of an optimum.
    Kkt(KktArgs),
    /// Closed-form solution of the order-one recursion.
    Recursion(RecursionArgs),
    /// Lower-triangular Toeplitz stationarity system.
    Toeplitz(ToeplitzArgs),
    /// Monte Carlo check of the queue-to-channel reduction.
    Simulate(SimulateArgs),
    /// Grid-search oracle on a small support.
    Oracle(OracleArgs),
}

/// `schema: {"version": 1, "command": {"<name>": {...}}, "options": {...}, "out": "...", "seed": 0}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "one")]
    pub version: u32,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> u32 {
    1
}

/// A builtin service name, a path to a service JSON file, or (in configs)
/// an inline service object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServiceRef {
    Name(String),
    Inline(ServiceSpec),
}

impl FromStr for ServiceRef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(ServiceRef::Name(s.to_string()))
    }
}

impl fmt::Display for ServiceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceRef::Name(n) => f.write_str(n),
            ServiceRef::Inline(s) => write!(f, "{}", s.family().tag()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Full,
    Gfb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Table,
    Json,
}

/// Which program to solve and at what budget. Only used flattened into
/// other arguments, whose own `deny_unknown_fields` covers these keys.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ProgramArgs {
    #[arg(long)]
    pub service: ServiceRef,
    #[arg(long, value_enum, default_value = "full")]
    #[serde(default = "full")]
    pub mode: ModeArg,
    /// Feedback parameter for `--mode gfb`.
    #[arg(long)]
    #[serde(default)]
    pub tau: Option<u64>,
    /// Arrival rate; the budget is `1/λ - 1/μ`.
    #[arg(long, conflicts_with = "budget")]
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Waiting-time budget `q` directly.
    #[arg(long)]
    #[serde(default)]
    pub budget: Option<f64>,
}

fn full() -> ModeArg {
    ModeArg::Full
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub program: ProgramArgs,
    /// Fixed input window `{0..=N}` instead of adaptive truncation.
    #[arg(long)]
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub service: ServiceRef,
    /// Comma-separated feedback parameters.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    #[serde(default = "default_taus")]
    pub taus: Vec<u64>,
    /// Points of the default geometric grid on (0.02μ, 0.98μ).
    #[arg(long, default_value_t = 32)]
    #[serde(default = "default_points")]
    pub points: usize,
    /// Explicit comma-separated rate grid.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "csv")]
    #[serde(default = "csv")]
    pub format: SweepFormat,
}

fn default_taus() -> Vec<u64> {
    vec![1]
}

fn default_points() -> usize {
    32
}

fn csv() -> SweepFormat {
    SweepFormat::Csv
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapArgs {
    #[arg(long)]
    pub service: ServiceRef,
    #[arg(long)]
    pub tau: u64,
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KktArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub program: ProgramArgs,
    /// Check a saved `solve` output instead of solving.
    #[arg(long)]
    #[serde(default)]
    pub solution: Option<PathBuf>,
    /// Largest acceptable residual (nats).
    #[arg(long, default_value_t = 1e-6)]
    #[serde(default = "default_kkt_tol")]
    pub tol: f64,
}

fn default_kkt_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "table")]
    #[serde(default = "table")]
    pub format: TableFormat,
}

fn table() -> TableFormat {
    TableFormat::Table
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToeplitzArgs {
    /// Comma-separated law `q_0, q_1, ...` of the system's first column.
    #[arg(long = "q", value_delimiter = ',', conflicts_with = "service")]
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    /// Use the law of `(S - τ)+` for this service instead.
    #[arg(long, requires = "tau")]
    #[serde(default)]
    pub service: Option<ServiceRef>,
    #[arg(long)]
    #[serde(default)]
    pub tau: Option<u64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "unit")]
    pub delta: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    pub service: ServiceRef,
    /// Feedback parameter; `inf` for full feedback.
    #[arg(long)]
    pub tau: Tau,
    #[arg(long, default_value_t = 10_000)]
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Offsets `X_i` drawn uniformly from `0..=x_max`.
    #[arg(long, default_value_t = 4)]
    #[serde(default = "default_x_max")]
    pub x_max: u64,
    #[arg(long, default_value_t = 8)]
    #[serde(default = "default_packets")]
    pub packets: usize,
    /// Fixed comma-separated offsets instead of random ones.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub x_fixed: Option<Vec<u64>>,
    /// Also write the first trial's queue trace as CSV.
    #[arg(long)]
    #[serde(default)]
    pub trace: Option<PathBuf>,
}

fn default_trials() -> u64 {
    10_000
}

fn default_x_max() -> u64 {
    4
}

fn default_packets() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub program: ProgramArgs,
    /// Largest input symbol.
    #[arg(long, default_value_t = 5)]
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Grid step of the input probabilities.
    #[arg(long, default_value_t = 1e-2)]
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_cap() -> usize {
    5
}

fn default_resolution() -> f64 {
    1e-2
}
