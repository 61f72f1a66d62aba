//! Command-line front end: catalog ingestion, calibration runs that persist
//! fitted parameters as plain-text `.params` files, and pricing runs that
//! read them back.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod catalog;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use catalog::EventCatalog;
pub use config::Config;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "catbond", version, about = "Multi-indicator catastrophe bond calibration and pricing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an event catalog and print per-indicator summaries.
    Ingest {
        /// Catalog CSV with header `event_id,date,<label>,...`.
        catalog: PathBuf,
        /// Also write catalog_summary.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the spliced Beta-GP marginals; writes marginals.params.
    FitMarginals(RunArgs),
    /// Mean-excess and parameter-stability tables over a threshold grid.
    DiagnoseThreshold(RunArgs),
    /// Fit the nested copula to pseudo-observations; writes copula.params.
    FitCopula(RunArgs),
    /// Fit the ARMA intensity model and forecast; writes frequency.params.
    FitFrequency(RunArgs),
    /// Price the bond as configured.
    Price(RunArgs),
    /// Price along a grid on common random numbers.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `trigger-quantile=LO:HI:STEP`, `intensity=LO:HI:STEP`,
        /// `maturity=1,2,3` or `subsets=AP-CAA-DEL,AP-CAA`.
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Parameter files layered over the configuration, in order.
    #[arg(long = "params", short)]
    pub params: Vec<PathBuf>,
    /// Single-entry overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn resolve(&self) -> CliResult<Config> {
        let mut cfg = Config::load(&self.config)?;
        for p in &self.params {
            cfg.merge_file(p)?;
        }
        for o in &self.overrides {
            cfg.set_override(o)?;
        }
        Ok(cfg)
    }
}

/// Runs one command and returns its human summary.
pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Ingest { catalog, out } => commands::ingest(catalog, out.as_deref()),
        Command::FitMarginals(a) => commands::fit_marginals(&a.resolve()?, &a.out),
        Command::DiagnoseThreshold(a) => commands::diagnose_threshold(&a.resolve()?, &a.out),
        Command::FitCopula(a) => commands::fit_copula(&a.resolve()?, &a.out),
        Command::FitFrequency(a) => commands::fit_frequency(&a.resolve()?, &a.out),
        Command::Price(a) => commands::price_cmd(&a.resolve()?, &a.out),
        Command::Sweep { run, grid } => {
            let g = commands::Grid::parse(grid)?;
            commands::sweep(&run.resolve()?, &g, &run.out)
        }
    }
}
