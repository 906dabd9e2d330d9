//! Command-line front end: `split`, `train`, `sweep`, `report`, `sample-hg`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

pub mod commands;
pub mod config;
pub mod report;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_sample_hg, cmd_split, cmd_sweep, cmd_train, TableEntry};
pub use config::{Cell, ExperimentConfig, Variant};
pub use report::cmd_report;

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "propssl", about = "Proportion-regularized semi-supervised learning on long-tailed data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Configuration file (`key = value` lines under `[section]` headers).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.lambda_prop=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. `1,2,3`.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write labeled/unlabeled/validation/test partitions and a manifest.
    Split(Common),
    /// Train each variant over all seeds and tabulate the results.
    Train(Common),
    /// Tune lambda_prop on validation accuracy.
    Sweep(Common),
    /// Charts and tables from run directories.
    Report {
        #[command(flatten)]
        common: Common,
        /// Variant or seed directories written by `train` or `sweep`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Sample the multivariate hypergeometric distribution.
    SampleHg {
        #[command(flatten)]
        common: Common,
        /// Class counts of the population, e.g. `2,2`.
        #[arg(long)]
        population: Option<String>,
        /// Items per draw.
        #[arg(short = 'n', long)]
        n: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Common {
    /// Resolves the configuration: file, then `--set`, then the dedicated flags.
    pub fn resolve(&self, extra: &[(String, String)]) -> Result<ExperimentConfig> {
        let mut overrides = self
            .set
            .iter()
            .map(|s| config::parse_override(s))
            .collect::<Result<Vec<_>>>()?;
        overrides.extend_from_slice(extra);
        if let Some(s) = &self.seeds {
            overrides.push(("sweep.seeds".into(), s.clone()));
        }
        if let Some(o) = &self.out {
            overrides.push(("output.out".into(), o.display().to_string()));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Split(c) => {
            let cfg = c.resolve(&[])?;
            for p in cmd_split(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Train(c) => {
            let cfg = c.resolve(&[])?;
            print_table(&cmd_train(&cfg)?);
            println!("results in {}", cfg.out.display());
        }
        Command::Sweep(c) => {
            let cfg = c.resolve(&[])?;
            print_table(&cmd_sweep(&cfg)?);
            println!("results in {}", cfg.out.display());
        }
        Command::Report { common, runs } => {
            let cfg = common.resolve(&[])?;
            cfg.echo_to(&cfg.out)?;
            let methods = cmd_report(runs, &cfg.out)?;
            println!("reported {} run(s) to {}", methods.len(), cfg.out.display());
        }
        Command::SampleHg {
            common,
            population,
            n,
            draws,
            seed,
        } => {
            let mut extra = Vec::new();
            let mut add = |k: &str, v: Option<String>| {
                if let Some(v) = v {
                    extra.push((k.to_string(), v));
                }
            };
            add("population", population.clone());
            add("draw_size", n.map(|v| v.to_string()));
            add("draws", draws.map(|v| v.to_string()));
            add("sample_seed", seed.map(|v| v.to_string()));
            let cfg = common.resolve(&extra)?;
            let samples = cmd_sample_hg(&cfg)?;
            println!("{} draws written to {}", samples.len(), cfg.out.display());
        }
    }
    Ok(())
}

fn print_table(entries: &[TableEntry]) {
    for e in entries {
        println!(
            "{:<11} {:<10} lambda={:<5} test={:.2}±{:.2}",
            e.variant.name(),
            e.cell.name(),
            e.lambda,
            e.test_mean * 100.0,
            e.test_std * 100.0
        );
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
