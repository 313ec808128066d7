//! Command-line experiment runner for `pwc-ident`.
//!
//! Subcommands:
//!
//! * `simulate` writes one CSV trajectory per regressor;
//! * `analyze` reports excitation levels, transition times, assumption flags
//!   and `Ω` bounds;
//! * `verify` classifies every interval, compares against the expected (or
//!   predicted) classes and evaluates the checks declared in the config;
//! * `reproduce <name>` runs all of the above on a preloaded config.
//!
//! The process exits with status 0 iff every evaluated check passes.

pub mod config;
pub mod run;

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{Experiment, Overrides};
use crate::run::{analysis_checks, analyze, simulate, verification_checks, verify, write_csv, write_report, CheckList};

#[derive(Debug, Parser)]
#[command(name = "pwc-ident", version, about = "Piecewise-constant parameter identification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every regressor and write CSV trajectories.
    Simulate(ConfigArgs),
    /// Excitation analysis: transition times, assumptions, bounds.
    Analyze(ConfigArgs),
    /// Interval verdicts, table comparison and configured checks.
    Verify(ConfigArgs),
    /// Run a preloaded experiment end to end.
    Reproduce {
        /// One of exp-a, exp-a-fast, exp-b, exp-noise.
        experiment: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory (default: out/<experiment>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time step override (s).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Noise seed override; output noise uses seed + 10000.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            seed: self.seed,
        }
    }

    fn out_dir(&self, exp: &Experiment) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&exp.name));
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Simulate,
    Analyze,
    Verify,
    Reproduce,
}

/// Runs one command, printing reports to stdout. Returns whether every
/// evaluated check passed.
pub fn execute(cli: Cli) -> Result<bool> {
    let (stage, exp, common) = match cli.command {
        Command::Simulate(a) => (Stage::Simulate, load(&a)?, a.common),
        Command::Analyze(a) => (Stage::Analyze, load(&a)?, a.common),
        Command::Verify(a) => (Stage::Verify, load(&a)?, a.common),
        Command::Reproduce { experiment, common } => {
            let exp = Experiment::preloaded(&experiment, common.overrides()).map_err(|e| anyhow!("{e}"))?;
            (Stage::Reproduce, exp, common)
        }
    };
    let dir = common.out_dir(&exp)?;
    let runs = simulate(&exp)?;

    if matches!(stage, Stage::Simulate | Stage::Reproduce) {
        for run in &runs {
            let path = write_csv(&dir, run)?;
            println!("wrote {}", path.display());
        }
        if stage == Stage::Simulate {
            return Ok(true);
        }
    }

    let analysis = analyze(&exp, &runs)?;
    write_report(&dir, "analysis", &analysis)?;
    println!("{analysis}");
    let mut checks = analysis_checks(&exp, &analysis);

    if stage != Stage::Analyze {
        let verification = verify(&exp, &runs, &analysis)?;
        write_report(&dir, "verdicts", &verification)?;
        println!("{verification}");
        checks.extend(verification_checks(&exp, &runs, &verification, common.overrides())?);
    }

    let list = CheckList::new(checks);
    write_report(&dir, "checks", &list)?;
    println!("{list}");
    Ok(list.all_pass)
}

fn load(args: &ConfigArgs) -> Result<Experiment> {
    Experiment::from_path(&args.config, args.common.overrides()).map_err(|e| anyhow!("{e}"))
}
