mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Conditional mirror-mirror entanglement: derived quantities, sweeps,
/// figure data, phase-space ellipses, and self-validation.
#[derive(Parser, Debug)]
#[command(name = "optoent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mode and filter quantities of both mechanical modes.
    Derive(Common),
    /// Full pipeline at one parameter point.
    Point(Common),
    /// Grid sweep from the `[sweep]` config section (default: the fig2 grid).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Points per axis when no `[sweep]` section is given.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Data behind a figure preset, written into the `--out` directory.
    Figure {
        /// fig2, fig3, fig5, fig6, fig7, fig8, or fig9.
        name: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Wigner-function contours of the common and differential modes and the ground state.
    Ellipse {
        #[command(flatten)]
        common: Common,
        /// Phase-space units: each mode's own frequency, or the mean of both.
        #[arg(long, value_enum, default_value_t = Norm::Own)]
        norm: Norm,
        #[arg(long, default_value_t = 256)]
        points: usize,
    },
    /// Internal consistency checks; exits 1 if any fails.
    Validate(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set cavity.zeta=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Measurement channel: x (amplitude) or y (phase).
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (directory for `figure`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "OPTOENT_JOBS")]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Named parameter point (black = reference setup).
    #[arg(long)]
    preset: Option<String>,
    /// Also write the effective configuration to this file.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum ChannelArg {
    X,
    Y,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Own,
    Mean,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Physics(optoent::Error),
    Io(String),
    /// Validation ran to completion but at least one check failed.
    ChecksFailed(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Physics(e) => write!(f, "{}: {e}", e.kind()),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::ChecksFailed(n) => write!(f, "{n} validation check(s) failed"),
        }
    }
}

impl From<optoent::Error> for CliError {
    fn from(e: optoent::Error) -> Self {
        match e {
            optoent::Error::InvalidParameter { .. } | optoent::Error::Domain { .. } => CliError::Config(e.to_string()),
            other => CliError::Physics(other),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Physics(_) | CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optoent: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
