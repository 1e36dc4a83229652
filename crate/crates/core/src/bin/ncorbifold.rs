use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ncorbifold::algebra::HaarConvention;
use ncorbifold::scenario::{load_scenario, run, write_artifacts, RunOptions, TaskKind};
use ncorbifold::Error;

#[derive(Parser)]
#[command(name = "ncorbifold", version, about = "Discrete noncommutative orbifolds: Morita checks and spectral distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Counting,
    Normalized,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.json and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Haar normalization of the groupoids, overriding the scenario.
    #[arg(long, value_enum)]
    convention: Option<Convention>,
    /// Relative stopping tolerance of the distance solver.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check bitorsor axioms and triple consistency.
    Validate(Common),
    /// Check the imprimitivity bimodule identities.
    Imprimitivity(Common),
    /// Run the Morita axiom checks M1 to M5.
    Morita(Common),
    /// Compute spectral distance brackets.
    Distance(Common),
    /// Refinement sweep of spectral against geodesic distance.
    Theorem3(Common),
    /// Dump Dirac spectra and matrices.
    Spectrum(Common),
    /// Run every task of the scenario.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, only) = match cli.command {
        Command::Validate(c) => (c, Some(TaskKind::Validate)),
        Command::Imprimitivity(c) => (c, Some(TaskKind::Imprimitivity)),
        Command::Morita(c) => (c, Some(TaskKind::Morita)),
        Command::Distance(c) => (c, Some(TaskKind::Distance)),
        Command::Theorem3(c) => (c, Some(TaskKind::Theorem3)),
        Command::Spectrum(c) => (c, Some(TaskKind::Spectrum)),
        Command::Run(c) => (c, None),
    };
    let scenario = match load_scenario(&common.scenario) {
        Ok(s) => s,
        Err(e @ Error::Scenario { .. }) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{}: {e}", common.scenario.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        seed: common.seed,
        haar: common.convention.map(|c| match c {
            Convention::Counting => HaarConvention::Counting,
            Convention::Normalized => HaarConvention::Normalized,
        }),
        tolerance: common.tolerance,
        only,
    };
    let outcome = match run(&scenario, &opts) {
        Ok(o) => o,
        Err(e @ Error::Scenario { .. }) => {
            eprintln!("{}: {e}", common.scenario.display());
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_artifacts(&common.out, &outcome.artifacts) {
        eprintln!("{e}");
        return ExitCode::from(1);
    }
    println!(
        "{}: {} ({})",
        scenario.name,
        if outcome.passed { "pass" } else { "fail" },
        common.out.join("report.json").display()
    );
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
