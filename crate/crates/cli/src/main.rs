//! `lclt`: classify, predict, simulate and verify local limit theorems for
//! suspension flows.

mod artifacts;
mod commands;
mod error;
mod system;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use artifacts::Format;
use error::CliError;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "lclt", version, about = "Local limit theorems for suspension flows")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Master seed for all random streams.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for Monte Carlo (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Artifact directory [default: lclt-out, or <manifest dir>/replay for replay].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Print the report as CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Multiplies every tolerance band used for PASS/FAIL.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

/// Settings that shape the outputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
    pub tolerance_scale: f64,
}

/// Everything needed to reproduce a run; stored in its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub global: Settings,
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Case label, covolume and mixing verdict of a system or generator set.
    Classify(ClassifyArgs),
    /// Limit prediction √t·P(...) for one window.
    Predict(PredictArgs),
    /// Prediction against Monte Carlo and exact oracles, with PASS/FAIL.
    Verify(VerifyArgs),
    /// Monte Carlo window estimates.
    Simulate(SimulateArgs),
    /// Leading eigenvalue curve of the twisted operator of a Markov system.
    Spectral(SpectralArgs),
    /// Exact oscillation scan of the three-atom renewal counterexample.
    Renewal(RenewalArgs),
    /// Correlation series of band sets.
    Correlate(CorrelateArgs),
    /// Re-run a manifest and check every output checksum.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Predict(_) => "predict",
            Command::Verify(_) => "verify",
            Command::Simulate(_) => "simulate",
            Command::Spectral(_) => "spectral",
            Command::Renewal(_) => "renewal",
            Command::Correlate(_) => "correlate",
            Command::Replay(_) => "replay",
        }
    }

    /// Make spec paths absolute so a manifest can be replayed from anywhere.
    fn resolved(mut self) -> Result<Self, CliError> {
        let fix = |p: &mut PathBuf| -> Result<(), CliError> {
            *p = p.canonicalize().map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            Ok(())
        };
        match &mut self {
            Command::Classify(a) => fix(&mut a.spec)?,
            Command::Predict(a) => fix(&mut a.spec)?,
            Command::Verify(a) => fix(&mut a.spec)?,
            Command::Simulate(a) => fix(&mut a.spec)?,
            Command::Spectral(a) => fix(&mut a.spec)?,
            Command::Correlate(a) => fix(&mut a.spec)?,
            Command::Renewal(_) | Command::Replay(_) => {}
        }
        Ok(self)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyArgs {
    /// System spec or generator set (JSON).
    pub spec: PathBuf,
    /// Treat (φ̌, τ) as having full support.
    #[arg(long)]
    pub full_support: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictArgs {
    pub spec: PathBuf,
    /// Flow time, exact syntax allowed (e.g. 100.3 or 3+2√2).
    #[arg(long)]
    pub t: String,
    /// Normalized offset w = lim W(t)/√t.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub w: f64,
    /// Fiber index for the discrete cases.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub l: i64,
    /// Target window [lo, hi) around W(t).
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub hi: f64,
    /// Assume case A for systems without exact values.
    #[arg(long)]
    pub nonlattice: bool,
    /// Use this flow variance instead of computing it.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub t: String,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    /// Normalized window offsets.
    #[arg(long, value_delimiter = ',', default_value = "-1,0,1", allow_hyphen_values = true)]
    pub windows: Vec<f64>,
    /// Windows are [−h, h] around w√t.
    #[arg(long, default_value_t = 0.5)]
    pub half_width: f64,
    /// Fiber index for case D.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub l: i64,
    #[arg(long)]
    pub nonlattice: bool,
    /// Override the flow variance used by the prediction.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub t: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, value_delimiter = ',', default_value = "-1,0,1", allow_hyphen_values = true)]
    pub windows: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub half_width: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentArg {
    Phi,
    Tau,
    Phitau,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralArgs {
    /// Markov system spec.
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = ComponentArg::Phi)]
    pub component: ComponentArg,
    /// Grid points on [−π, π].
    #[arg(long, default_value_t = 721)]
    pub points: usize,
    /// Direction angle of the curve for the two-dimensional component.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub direction: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalArgs {
    /// Times to scan (exact syntax).
    #[arg(long = "t", value_delimiter = ',', default_value = "20.2,30.2,40.2,20.5,30.5,40.5,20.9,30.9,40.9")]
    pub times: Vec<String>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelateArgs {
    pub spec: PathBuf,
    /// Band sets {0 ≤ s < δ}.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 50.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 51.0)]
    pub t1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn default_out(cmd: &Command) -> PathBuf {
    match cmd {
        Command::Replay(r) => r.manifest.parent().unwrap_or(Path::new(".")).join("replay"),
        _ => PathBuf::from("lclt-out"),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli.global.out.clone().unwrap_or_else(|| default_out(&cli.command));
    let format = match (cli.global.json, cli.global.csv) {
        (true, _) => Format::Json,
        (_, true) => Format::Csv,
        _ => Format::Text,
    };
    let settings =
        Settings { seed: cli.global.seed, workers: cli.global.workers.max(1), format, tolerance_scale: cli.global.tolerance_scale };
    if let Command::Replay(r) = &cli.command {
        let report = commands::replay(&r.manifest, &out)?;
        print!("{}", report.render(format));
        return Ok(());
    }
    let cfg = RunConfig { global: settings, command: cli.command.resolved()? };
    let outcome = commands::execute(&cfg, &out)?;
    print!("{}", outcome.report.render(format));
    match outcome.failure {
        Some(msg) => Err(CliError::Verify(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lclt: {e}");
            ExitCode::from(e.code())
        }
    }
}
