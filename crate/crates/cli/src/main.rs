//! `ambistop`: solve, simulate and verify stopping problems under ambiguity
//! from a JSON run configuration.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use ambistop::Exec;
use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::{Format, Grid};

#[derive(Parser)]
#[command(name = "ambistop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override the output format set in the config.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Run Monte Carlo and oracle loops on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bayesian thresholds and cost cutoffs.
    Thresholds(Common),
    /// Equilibrium boundaries and coefficients.
    Solve(Common),
    /// Policy at one state or over `state_grid`.
    Policy {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        state: Option<f64>,
    },
    /// Stopping-time CDF of the equilibrium.
    Cdf(Common),
    /// Monte Carlo stopping times (needs `seed` and `n_paths`).
    Simulate(Common),
    /// Expected learning time against the centre of the prior set.
    LearningTime {
        #[command(flatten)]
        common: Common,
        /// `lo:hi:n`
        #[arg(long, value_parser = Grid::parse)]
        theta_grid: Option<Grid>,
    },
    /// Bayesian, naive and sophisticated stopping CDFs.
    CdfCompare(Common),
    /// Equilibrium boundaries across `delta_grid`.
    SweepDelta(Common),
    /// Two-source belief path and attention policy.
    TwoSource(Common),
    /// Diffusion first-passage Monte Carlo against the closed form.
    Diffusion(Common),
    /// Oracle suite with a pass/fail report; exit 4 on failure.
    Verify(Common),
}

impl Command {
    fn name_and_common(&self) -> (&'static str, &Common) {
        match self {
            Command::Thresholds(c) => ("thresholds", c),
            Command::Solve(c) => ("solve", c),
            Command::Policy { common, .. } => ("policy", common),
            Command::Cdf(c) => ("cdf", c),
            Command::Simulate(c) => ("simulate", c),
            Command::LearningTime { common, .. } => ("learning-time", common),
            Command::CdfCompare(c) => ("cdf-compare", c),
            Command::SweepDelta(c) => ("sweep-delta", c),
            Command::TwoSource(c) => ("two-source", c),
            Command::Diffusion(c) => ("diffusion", c),
            Command::Verify(c) => ("verify", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.name_and_common();
    let loaded = match config::load(&common.config) {
        Ok(l) => l,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(commands::EXIT_CONFIG as u8);
        }
    };
    let cfg = &loaded.config;
    let format = match common.format.as_deref() {
        Some("json") => Format::Json,
        Some(_) => Format::Csv,
        None => cfg.format,
    };
    let exec = if common.sequential { Exec::Sequential } else { Exec::default() };

    let result = match &cli.command {
        Command::Thresholds(_) => commands::thresholds(cfg),
        Command::Solve(_) => commands::solve_cmd(cfg),
        Command::Policy { state, .. } => commands::policy(cfg, *state),
        Command::Cdf(_) => commands::cdf(cfg),
        Command::Simulate(_) => commands::simulate(cfg, exec),
        Command::LearningTime { theta_grid, .. } => commands::learning_time(cfg, *theta_grid),
        Command::CdfCompare(_) => commands::cdf_compare(cfg),
        Command::SweepDelta(_) => commands::sweep_delta(cfg),
        Command::TwoSource(_) => commands::two_source(cfg),
        Command::Diffusion(_) => commands::diffusion_cmd(cfg, exec),
        Command::Verify(_) => commands::verify(cfg, exec),
    };

    let (table, code) = match result {
        Ok(t) => (Some(t), 0),
        Err(Failure { code, message, table }) => {
            eprintln!("error: {message}");
            (table, code)
        }
    };
    if let Some(t) = table {
        let text = t.render(name, &loaded.sha256, format);
        let written = match &common.output {
            Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
            None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
        };
        if let Err(msg) = written {
            eprintln!("error: {msg}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::from(code as u8)
}
