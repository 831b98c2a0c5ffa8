//! `sie optimize`: search per-unit stochastic degrees with the genetic
//! algorithm and compare the result with simple policies.

use crate::config::OptimizeConfig;
use crate::output::RunOutput;
use anyhow::Result;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stochint::dataset::ObservationalDataset;
use stochint::gesio::{optimize, sample_initial, Optimization};
use stochint::rng::stream_rng;

/// RNG stream of the random comparison policy.
const RANDOM_POLICY_STREAM: u64 = 0x007A_11D0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    /// Mean response under the optimized degrees.
    pub optimized: f64,
    /// Mean response with every degree at 1 (the observed policy).
    pub status_quo: f64,
    /// Mean response under degrees drawn like the initial population.
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub n: usize,
    pub generations: usize,
    pub population_size: usize,
    pub best_fitness: f64,
    pub initial_best_fitness: f64,
    pub mean_delta: f64,
    pub expected_response: PolicyComparison,
}

/// A random policy of length `n` for GA seed `seed`.
pub fn random_policy(n: usize, config: &OptimizeConfig) -> Vec<f64> {
    let mut rng = stream_rng(config.ga.seed, RANDOM_POLICY_STREAM);
    sample_initial(n, &config.ga, &mut rng)
}

pub fn compute(
    config: &OptimizeConfig,
    data: &ObservationalDataset,
) -> Result<(Optimization, OptimizeReport)> {
    let opt = optimize(
        data,
        &config.ga,
        &config.nuisance,
        config.folds,
        config.seed,
    )?;
    let n = data.n();
    let comparison = PolicyComparison {
        optimized: opt.expected_response(opt.result.best.deltas())?,
        status_quo: opt.expected_response(&vec![1.0; n])?,
        random: opt.expected_response(&random_policy(n, config))?,
    };
    let report = OptimizeReport {
        n,
        generations: config.ga.generations,
        population_size: config.ga.population_size,
        best_fitness: opt.result.best_fitness,
        initial_best_fitness: opt.result.trace.initial_best,
        mean_delta: opt.result.best.mean(),
        expected_response: comparison,
    };
    Ok((opt, report))
}

/// Writes `report.json`, `tables/best_delta.csv`, `tables/trace.csv` and,
/// when snapshots are enabled, `tables/snapshots.csv`.
pub fn run(config: &OptimizeConfig, out: &Path) -> Result<(OptimizeReport, PathBuf)> {
    let mut config = config.clone();
    config.resolve()?;
    let data = config.data.load()?;
    log::info!(
        "optimizing {} degrees: population {}, {} generations",
        data.n(),
        config.ga.population_size,
        config.ga.generations
    );
    let (opt, report) = compute(&config, &data)?;

    let mut run = RunOutput::create(out)?;
    run.write_json("config.json", &config)?;
    run.write_json("report.json", &report)?;
    let best = run.path("tables/best_delta.csv")?;
    opt.result.best.write_csv(&best)?;
    let trace = run.path("tables/trace.csv")?;
    opt.result.trace.write_csv(&trace)?;
    if !opt.result.trace.snapshots.is_empty() {
        let mut text = String::from("generation,unit_index,delta\n");
        for (g, genome) in &opt.result.trace.snapshots {
            for (i, d) in genome.iter().enumerate() {
                text.push_str(&format!("{g},{i},{d:?}\n"));
            }
        }
        run.write_text("tables/snapshots.csv", &text)?;
    }
    Ok((report, run.commit()))
}
