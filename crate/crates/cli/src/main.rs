//! `bodyscene` command-line pipeline.
//!
//! Exit codes: 0 success, 1 I/O or usage error, 2 estimation failure,
//! 3 no accepted placement.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::PipelineConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn stage(stage: &str, err: bodyscene::Error) -> Self {
        let mut e = CliError::from(err);
        e.message = format!("{stage}: {}", e.message);
        e
    }
}

impl From<bodyscene::Error> for CliError {
    fn from(err: bodyscene::Error) -> Self {
        let code = if err.is_estimation_failure() { 2 } else { 1 };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub const EXIT_NO_PLACEMENT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bodyscene",
    version,
    about = "Composite posed parametric bodies into RGB-D scenes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Configured {
    /// JSON configuration file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: PipelineConfig,
}

impl Configured {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        PipelineConfig::merged(self.config.as_deref(), &self.flags)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureKind {
    Open,
    Occupied,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the support plane of a scene
    FitPlane(Configured),
    /// Evaluate placements on a floor grid
    Place(Configured),
    /// Compute the body displacement field between two parameter sets
    Displace(Configured),
    /// Place, render and composite a body into a scene
    Composite(Configured),
    /// Write a harmonization triplet
    Perturb(Configured),
    /// Compare two images
    Ssim { a: PathBuf, b: PathBuf },
    /// Run every stage and write a reproducible output tree
    Pipeline(Configured),
    /// Write a synthetic room scene with assets and a pipeline config
    Fixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::FitPlane(c) => commands::fit_plane(&c.resolve()?),
        Command::Place(c) => commands::place(&c.resolve()?),
        Command::Displace(c) => commands::displace(&c.resolve()?),
        Command::Composite(c) => commands::composite(&c.resolve()?),
        Command::Perturb(c) => commands::perturb(&c.resolve()?),
        Command::Ssim { a, b } => commands::ssim(&a, &b),
        Command::Pipeline(c) => commands::pipeline(&c.resolve()?),
        Command::Fixture { kind, seed, out } => commands::fixture(matches!(kind, FixtureKind::Occupied), seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bodyscene: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
