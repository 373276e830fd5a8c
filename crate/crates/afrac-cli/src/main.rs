//! `afrac` — airborne-fraction estimation toolkit.
//!
//! Subcommands reproduce the full analysis pipeline from the bundled annual
//! carbon-budget data: least-squares estimates with HAC inference
//! (`estimate`), the unit-root/cointegration/normality battery (`tests`),
//! Deming regression grids (`deming`), cumulative airborne fractions
//! (`caf`), the Kalman-smoothed time-varying AF on future scenarios
//! (`tvaf`), the Monte Carlo RMSE study (`simstudy`), and regeneration of
//! the simulated critical-value tables (`tables`).

mod commands;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use afrac::AfError;

#[derive(Parser)]
#[command(name = "afrac", version, about = "Airborne-fraction estimation from annual carbon-budget data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Least-squares estimates of the airborne fraction (four models)
    Estimate(commands::EstimateArgs),
    /// ADF / Engle-Granger / Jarque-Bera test battery
    Tests(commands::TestsArgs),
    /// Deming (errors-in-variables) estimates over the delta grid
    Deming(commands::DemingArgs),
    /// Cumulative airborne fraction, full-sample and trailing-window
    Caf(commands::CafArgs),
    /// Time-varying airborne fraction on a scenario via Kalman smoothing
    Tvaf(commands::TvafArgs),
    /// Monte Carlo RMSE comparison of the two estimators
    Simstudy(commands::SimstudyArgs),
    /// Regenerate the simulated critical-value tables
    Tables(commands::TablesArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => commands::estimate(&args),
        Command::Tests(args) => commands::tests(&args),
        Command::Deming(args) => commands::deming(&args),
        Command::Caf(args) => commands::caf(&args),
        Command::Tvaf(args) => commands::tvaf(&args),
        Command::Simstudy(args) => commands::simstudy(&args),
        Command::Tables(args) => commands::tables(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Input/configuration problems exit with 2, computation failures with 1.
fn exit_code(err: &AfError) -> u8 {
    match err {
        AfError::Io { .. }
        | AfError::Csv { .. }
        | AfError::BadNumber { .. }
        | AfError::MissingColumn { .. }
        | AfError::YearGap { .. }
        | AfError::WindowOutOfRange { .. }
        | AfError::MissingCovariates(_)
        | AfError::InvalidArgument(_)
        | AfError::MissingTable { .. } => 2,
        _ => 1,
    }
}
