//! ```text
//! sie simulate  --source ihdp-like --n 747 --out runs/sim
//! sie estimate  --data runs/sim/tables/data.csv --truth runs/sim/tables/truth.csv --delta 2
//! sie estimate  --source op-like --delta-grid 0:10:0.5
//! sie benchmark --methods sie,ols,ipwe --replications 100
//! sie optimize  --source op-like --n 1000 --generations 100
//! ```
//!
//! Logging goes to stderr; set `RUST_LOG=info` for progress.

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = sie_cli::args::Cli::parse();
    match sie_cli::args::execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
