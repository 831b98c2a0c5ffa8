//! `sie simulate`: draw a synthetic dataset and save it with its truth file.

use crate::config::SimulateConfig;
use crate::output::RunOutput;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stochint::dataset::{write_csv, write_truth_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub n: usize,
    pub d: usize,
    pub n_treated: usize,
    pub treated_fraction: f64,
    pub true_ate: f64,
}

/// Writes `tables/data.csv` (covariates, `t`, `y`) and `tables/truth.csv`.
pub fn run(config: &SimulateConfig, out: &Path) -> Result<(SimulateReport, PathBuf)> {
    let mut config = config.clone();
    config.resolve()?;
    let data = config.data.load()?;
    let truth = data.truth().context("generated data carries its truth")?;
    let report = SimulateReport {
        n: data.n(),
        d: data.d(),
        n_treated: data.n_treated(),
        treated_fraction: data.treated_fraction(),
        true_ate: truth.ate(),
    };

    let mut run = RunOutput::create(out)?;
    run.write_json("config.json", &config)?;
    let data_path = run.path("tables/data.csv")?;
    write_csv(&data, &data_path, false)?;
    let truth_path = run.path("tables/truth.csv")?;
    write_truth_csv(truth, &truth_path)?;
    run.write_json("report.json", &report)?;
    Ok((report, run.commit()))
}
