//! `wormscan` command-line tool. Every command writes its results, a
//! `manifest.json` describing the run and a `run.json` with timing into
//! `--out`.

mod args;
mod commands;
mod manifest;

use std::fmt;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::Cli;
use manifest::{RunManifest, RunTiming};

/// Exit status plus message.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<wormscan::Error> for CliError {
    fn from(e: wormscan::Error) -> Self {
        use wormscan::Error as E;
        match e {
            E::Parse { .. } | E::Io(_) | E::Csv(_) => CliError::input(e.to_string()),
            E::Parameter(_) | E::Capacity { .. } | E::Unsupported { .. } => {
                CliError::usage(e.to_string())
            }
            E::Internal(_) => CliError::internal(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<_> = std::env::args_os().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let started = Instant::now();
    let mut manifest = RunManifest::new(&argv);
    let threads = cli.threads;
    let outcome = wormscan::exec::with_threads(threads, || commands::run(&cli, &mut manifest))
        .and_then(|()| {
            commands::write_json(&cli.out, "manifest.json", &manifest)?;
            let timing = RunTiming {
                threads,
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            };
            commands::write_json(&cli.out, "run.json", &timing)
        });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
