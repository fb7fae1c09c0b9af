use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use menshov::Error;
use serde::Serialize;

mod commands;
mod config;

use config::{Overrides, RunConfig};

/// Bounded analytic corrections of boundary data by holomorphic martingales.
#[derive(Parser, Debug)]
#[command(name = "menshov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One bounded correction at level --lambda.
    Lemma2(Overrides),
    /// Full iteration: g analytic and bounded with Re g = u off a small set.
    Correct(Overrides),
    /// Nontangential maximal function, tail fits, pointwise and good-set checks.
    Diagnose(Overrides),
    /// Oscillation tails of the conjugate function over dyadic arcs.
    Jn(Overrides),
    /// Write a fixture as boundary CSV.
    GenFixture {
        /// square, cosine or log.
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 4096)]
        grid_n: usize,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub exit_code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(exit_code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit_code,
            kind,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::GridSize(_) => (2, "grid_size"),
            Error::NotReal => (2, "not_real"),
            Error::Length { .. } => (2, "length"),
            Error::Domain { .. } => (2, "domain"),
            Error::Param { .. } => (2, "param"),
            Error::Parse(_) => (2, "parse"),
            Error::Io(_) => (2, "io"),
            Error::Insufficient(_) => (3, "insufficient"),
            Error::TooManyDiscarded { .. } => (3, "too_many_discarded"),
            Error::MaxSteps { .. } => (3, "max_steps"),
            Error::Bound(_) => (4, "bound"),
            Error::Internal(_) => (4, "internal"),
        };
        Self::new(code, kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type Runner = fn(&RunConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), (CliError, Option<PathBuf>)> {
    let (o, f): (&Overrides, Runner) = match &cli.command {
        Command::GenFixture {
            name,
            grid_n,
            output,
        } => return commands::gen_fixture(name, *grid_n, output.as_deref()).map_err(|e| (e, None)),
        Command::Lemma2(o) => (o, commands::lemma2),
        Command::Correct(o) => (o, commands::correct_cmd),
        Command::Diagnose(o) => (o, commands::diagnose),
        Command::Jn(o) => (o, commands::jn),
    };
    let cfg = RunConfig::resolve(o).map_err(|e| (e.into(), o.output_dir.clone()))?;
    f(&cfg).map_err(|e| (e, Some(cfg.output_dir.clone())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((err, dir)) => {
            let json = serde_json::to_string_pretty(&err).unwrap_or_else(|_| err.message.clone());
            eprintln!("{json}");
            if let Some(dir) = dir {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), format!("{json}\n"));
                }
            }
            ExitCode::from(err.exit_code)
        }
    }
}
