//! Command-line front end for the ground-state solver.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 when
//! the solver fails to converge, 3 for I/O failures and 4 for any other
//! numerical failure (failed bracket, oracle or self-test).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::fs;
use std::path::PathBuf;

use clap::Parser;

use config::{Command, RunConfig};
use error::CliError;
use output::{to_json, Output};

#[derive(Debug, Parser)]
#[command(
    name = "delta-nls",
    version,
    about = "Ground states of the coupled cubic NLS system with a point interaction"
)]
pub struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    pub command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,

    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Builds the run configuration: file, then `--set` overrides in order,
/// then the positional command and `--out`.
pub fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.command = cli.command;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the configured command and prints a summary to stdout.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = Output::new(&cfg.output_dir, &cfg.formats)?;
    let lines = commands::run(cfg, &mut out)?;
    for l in lines {
        println!("{l}");
    }
    for p in &out.written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Full CLI behavior; returns the process exit status.
pub fn main_with(cli: Cli) -> u8 {
    let (e, dir) = match configure(&cli) {
        Err(e) => (e, None),
        Ok(cfg) => match execute(&cfg) {
            Ok(()) => return 0,
            Err(e) => (e, Some(cfg.output_dir)),
        },
    };
    let doc = to_json(&e.to_json());
    eprint!("{doc}");
    if let Some(dir) = dir {
        // Best effort: the directory may be the thing that failed.
        let _ = fs::write(dir.join("error.json"), &doc);
    }
    e.exit_code()
}
