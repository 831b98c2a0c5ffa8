//! `sie benchmark`: ATE error of the stochastic estimator against OLS and
//! IPW baselines over repeated train/test splits.
//!
//! Per replication `r` the split and fold seed is `derive_seed(seed, r)`.
//! Under `replicate = "dgp"` the dataset is also redrawn with
//! `derive_seed(data.seed, r)`. Each method is fitted on the training side
//! and scored against the sample ATE of each side:
//!
//! - `sie`: cross-fitted contrast on train, train-fitted nuisances on test
//! - `ols`: per-arm least squares fitted on train
//! - `ipwe`: propensity fitted on train, Horvitz-Thompson on each side

use crate::config::{BenchmarkConfig, Method, Replicate};
use crate::output::RunOutput;
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stochint::dataset::{train_test_split, ObservationalDataset};
use stochint::rng::derive_seed;
use stochint::sie::{
    ate_contrast, cross_fit, epsilon_ate, evaluate_held_out, ipwe_held_out, OlsTLearner,
};
use stochint::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub split: Split,
    pub estimate: f64,
    pub truth: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub method: Method,
    pub split: Split,
    pub mean_epsilon: f64,
    /// Sample standard deviation over replications (`n - 1` denominator).
    pub std_epsilon: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub n: usize,
    pub summary: Vec<SummaryRow>,
    /// Summary rows for every size of the size grid.
    pub sizes: Vec<SummaryRow>,
    #[serde(skip)]
    pub replications: Vec<ReplicationRow>,
}

impl BenchmarkResult {
    pub fn find(&self, method: Method, split: Split) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.split == split)
    }
}

fn split_scores(
    n: usize,
    replication: usize,
    seed: u64,
    method: Method,
    estimates: [(Split, f64, f64); 2],
) -> Vec<ReplicationRow> {
    estimates
        .into_iter()
        .map(|(split, estimate, truth)| ReplicationRow {
            n,
            replication,
            seed,
            method,
            split,
            estimate,
            truth,
            epsilon: epsilon_ate(estimate, truth),
        })
        .collect()
}

/// All method scores for one replication of a dataset.
pub fn score_replication(
    config: &BenchmarkConfig,
    data: &ObservationalDataset,
    replication: usize,
    seed: u64,
) -> Result<Vec<ReplicationRow>> {
    let n = data.n();
    let (train, test) = train_test_split(data, config.test_fraction, seed)?;
    let truth_train = train
        .true_ate()
        .context("benchmark data needs ground truth")?;
    let truth_test = test
        .true_ate()
        .context("benchmark data needs ground truth")?;
    let mut rows = Vec::new();
    for &method in &config.methods {
        let (on_train, on_test) = match method {
            Method::Sie => {
                let cf = cross_fit(&train, config.folds, seed, &config.nuisance)?;
                let held = evaluate_held_out(&train, &test, &config.nuisance)?;
                (cf.ate_contrast(), ate_contrast(&held))
            }
            Method::Ols => {
                let model = OlsTLearner::fit(&train)?;
                (model.ate_on(&train).ate, model.ate_on(&test).ate)
            }
            Method::Ipwe => {
                let cfg = config.ipwe.as_ref().unwrap_or(&config.nuisance.propensity);
                (
                    ipwe_held_out(&train, &train, cfg)?,
                    ipwe_held_out(&train, &test, cfg)?,
                )
            }
        };
        rows.extend(split_scores(
            n,
            replication,
            seed,
            method,
            [
                (Split::Train, on_train, truth_train),
                (Split::Test, on_test, truth_test),
            ],
        ));
    }
    Ok(rows)
}

/// Every replication at dataset size `n`, in replication order.
pub fn run_size(config: &BenchmarkConfig, n: Option<usize>) -> Result<Vec<ReplicationRow>> {
    let fixed = match config.replicate {
        Replicate::Seed => Some(match n {
            Some(n) => config.data.generate(n, config.data.seed)?,
            None => config.data.load()?,
        }),
        Replicate::Dgp => None,
    };
    let per_rep: Vec<Result<Vec<ReplicationRow>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(config.seed, r as u64);
            let drawn;
            let data = match &fixed {
                Some(d) => d,
                None => {
                    let size = n.or(config.data.n).unwrap_or(747);
                    drawn = config
                        .data
                        .generate(size, derive_seed(config.data.seed, r as u64))?;
                    &drawn
                }
            };
            score_replication(config, data, r, seed).with_context(|| format!("replication {r}"))
        })
        .collect();
    let mut rows = Vec::new();
    for rep in per_rep {
        rows.extend(rep?);
    }
    Ok(rows)
}

/// Mean and standard deviation of the error per (n, method, split).
pub fn summarize(rows: &[ReplicationRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Method, Split)> = Vec::new();
    for r in rows {
        let key = (r.n, r.method, r.split);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(n, method, split)| {
            let eps: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n && r.method == method && r.split == split)
                .map(|r| r.epsilon)
                .collect();
            SummaryRow {
                n,
                method,
                split,
                mean_epsilon: mean(&eps),
                std_epsilon: if eps.len() > 1 { std_dev(&eps) } else { 0.0 },
                replications: eps.len(),
            }
        })
        .collect()
}

/// Run the benchmark on a resolved config.
pub fn compute(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let mut rows = run_size(config, None)?;
    let n = rows.first().map(|r| r.n).unwrap_or(0);
    let summary = summarize(&rows);
    let mut size_rows = Vec::new();
    for &size in &config.sizes {
        if size == n {
            size_rows.extend(rows.iter().cloned());
            continue;
        }
        log::info!("size grid: n={size}");
        let extra = run_size(config, Some(size))?;
        size_rows.extend(extra.iter().cloned());
        rows.extend(extra);
    }
    Ok(BenchmarkResult {
        n,
        summary,
        sizes: summarize(&size_rows),
        replications: rows,
    })
}

/// Writes `report.json`, `tables/summary.csv`, `tables/replications.csv`
/// and, with a size grid, `tables/sizes.csv`.
pub fn run(config: &BenchmarkConfig, out: &Path) -> Result<(BenchmarkResult, PathBuf)> {
    let mut config = config.clone();
    config.resolve()?;
    log::info!(
        "benchmark: {} replications of {:?}",
        config.replications,
        config.methods
    );
    let result = compute(&config)?;

    let mut run = RunOutput::create(out)?;
    run.write_json("config.json", &config)?;
    run.write_json("report.json", &result)?;
    run.write_rows("tables/summary.csv", &result.summary)?;
    run.write_rows("tables/replications.csv", &result.replications)?;
    if !config.sizes.is_empty() {
        run.write_rows("tables/sizes.csv", &result.sizes)?;
    }
    Ok((result, run.commit()))
}
