//! Command-line front end.
//!
//! Streaming commands read NDJSON events (`{"arm": i}` or
//! `{"arm": i, "t": seconds}`) and write CSV reports. Exit status is 0 when
//! the input ran out without rejection, 2 when a test rejected and 1 on error.

pub mod checkpoint;
pub mod config;
pub mod input;
mod simulate;
mod stream;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::Direction;
pub use stream::StreamKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "countseq", version, about = "Anytime-valid sequential tests for count data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample ratio mismatch: test observed arm counts against intended assignment.
    Srm(StreamArgs),
    /// Conversions: contrasts of arm log-rates from success counts.
    Convert(StreamArgs),
    /// Canary: compare timestamped event streams whose rates vary in time.
    Canary(CanaryArgs),
    /// Monte-Carlo experiments and scenario replays.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        #[command(flatten)]
        args: SimArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// NDJSON events; stdin when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resume from this file if it exists, and save state to it at the end.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Significance level, overriding the config.
    #[arg(long)]
    pub u: Option<f64>,
    /// Emit a report row every k observations.
    #[arg(long)]
    pub report_every: Option<u64>,
    /// Abort on the first malformed event instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CanaryArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    /// Seconds of timestamp disorder tolerated by the reorder buffer.
    #[arg(long)]
    pub reorder_window: Option<f64>,
    /// One-sided composite test of each arm against arm 0.
    #[arg(long, value_enum)]
    pub direction: Option<Direction>,
    /// Release buffered events at the end even when checkpointing.
    #[arg(long)]
    pub finalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Type1,
    Power,
    Coverage,
    Bernoulli,
    Poisson,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significance level, overriding the config.
    #[arg(long)]
    pub u: Option<f64>,
    /// Also write the simulated event stream (first replication) as NDJSON.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Srm(args) => stream::run_stream(StreamKind::Srm, &args, None, None, false),
        Command::Convert(args) => stream::run_stream(StreamKind::Convert, &args, None, None, false),
        Command::Canary(c) => stream::run_stream(
            StreamKind::Canary,
            &c.stream,
            c.reorder_window,
            c.direction,
            c.finalize,
        ),
        Command::Simulate { kind, args } => simulate::run_simulate(kind, &args),
    }
}

/// Parses arguments, runs, and maps errors to exit code 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
