//! Argument parsing and dispatch for the `locbal` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigSource;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "locbal", version, about = "Locally-balanced MCMC experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run kernels on a target and compare their efficiency.
    Simulate(Common),
    /// Exact-mode checks on enumerable targets; exit code 2 on failure.
    Verify(Common),
    /// Record linkage between two CSV files.
    Rl {
        #[command(flatten)]
        common: Common,
        /// First file (overrides rl.x).
        #[arg(long)]
        x: Option<PathBuf>,
        /// Second file (overrides rl.y).
        #[arg(long)]
        y: Option<PathBuf>,
    },
    /// Write synthetic record-linkage data with its true matching.
    Generate(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set run.iterations=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn source(&self) -> CliResult<ConfigSource> {
        let mut src = match &self.config {
            Some(p) => ConfigSource::from_file(p)?,
            None => ConfigSource::empty(),
        };
        for o in &self.overrides {
            src.set(o)?;
        }
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed)
                .map_err(|_| CliError::Usage("seed must be below 2^63".into()))?;
            src.set_value("seed", toml::Value::Integer(seed))?;
        }
        if let Some(out) = &self.out {
            src.set_value("out", toml::Value::String(out.display().to_string()))?;
        }
        Ok(src)
    }
}

fn path_value(p: &std::path::Path) -> toml::Value {
    toml::Value::String(p.display().to_string())
}

/// Run a parsed command line; the caller maps errors to exit codes.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate(c) => {
            crate::simulate::cmd_simulate(&c.source()?)?;
            Ok("simulation finished".into())
        }
        Command::Verify(c) => {
            let report = crate::verify::cmd_verify(&c.source()?)?;
            Ok(format!("all {} checks passed", report.checks.len()))
        }
        Command::Rl { common, x, y } => {
            let mut src = common.source()?;
            if let Some(x) = x {
                src.set_value("rl.x", path_value(&x))?;
            }
            if let Some(y) = y {
                src.set_value("rl.y", path_value(&y))?;
            }
            let s = crate::rl::cmd_rl(&src)?;
            let corr = s
                .replicate_correlation
                .map_or(String::new(), |c| format!(", replicate correlation {c:.4}"));
            Ok(format!(
                "linked {} x {} records, {} pairs reported{corr}",
                s.nx, s.ny, s.pairs_reported
            ))
        }
        Command::Generate(c) => {
            let d = crate::generate::cmd_generate(&c.source()?)?;
            Ok(format!(
                "generated {} + {} records, {} true links",
                d.x.len(),
                d.y.len(),
                d.truth.n_matched()
            ))
        }
    }
}
