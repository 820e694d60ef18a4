mod analyze;
mod dimension;
mod limits;
mod mol;
mod output;
mod simulate;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use erlangr::model::ModelParams;

use output::Format;

/// Restricted Erlang-R analysis: exact models, QED limits, dimensioning and simulation.
#[derive(Debug, Parser)]
#[command(name = "erlangr", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format; `mol` and `tables` default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Random seed for simulations; ERLANGR_SEED takes precedence.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Progress messages on standard error.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact stationary performance of the blocking or holding model.
    Analyze(analyze::AnalyzeArgs),
    /// Limits of the scaled measures under square-root capacity.
    Limits(limits::LimitsArgs),
    /// Servers and beds for a target delay probability.
    Dimension(dimension::DimensionArgs),
    /// Discrete-event simulation from a JSON configuration file.
    Simulate(simulate::SimulateArgs),
    /// Time-varying staffing from the modified offered load.
    Mol(mol::MolArgs),
    /// Accuracy tables and plot-ready figure data.
    Tables(tables::TablesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Blocking,
    Holding,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Arrival rate.
    #[arg(long)]
    pub lambda: f64,
    /// Service rate at the needy station.
    #[arg(long)]
    pub mu: f64,
    /// Rate of becoming needy again.
    #[arg(long)]
    pub delta: f64,
    /// Probability of returning after service.
    #[arg(long)]
    pub p: f64,
}

impl ParamArgs {
    pub fn params(&self) -> Result<ModelParams, Failure> {
        Ok(ModelParams::new(self.lambda, self.mu, self.delta, self.p)?)
    }
}

/// Global settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub verbose: u8,
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let seed = match std::env::var("ERLANGR_SEED") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure::usage(format!("ERLANGR_SEED={v} is not an integer")))?),
            Err(_) => cli.seed,
        };
        Ok(Self { format: cli.format, output: cli.output.clone(), seed, verbose: cli.verbose })
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn io(e: impl std::fmt::Display) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

impl From<erlangr::Error> for Failure {
    fn from(e: erlangr::Error) -> Self {
        use erlangr::Error::*;
        let code = match e {
            Domain(_) | ScheduleGap(_) => 1,
            NotStable { .. } => 2,
            Infeasible { .. } | InfeasibleTarget(_) => 3,
            MaxIterations { .. } | SingularSystem(_) | NoConvergence { .. } => 4,
        };
        Self { code, message: e.to_string() }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = RunConfig::from_cli(cli)?;
    match &cli.command {
        Command::Analyze(a) => analyze::run(a, &cfg),
        Command::Limits(a) => limits::run(a, &cfg),
        Command::Dimension(a) => dimension::run(a, &cfg),
        Command::Simulate(a) => simulate::run(a, &cfg),
        Command::Mol(a) => mol::run(a, &cfg),
        Command::Tables(a) => tables::run(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
