//! `sie estimate`: cross-fitted stochastic intervention estimates on one
//! dataset, optionally over a grid of degrees.

use crate::config::EstimateConfig;
use crate::output::RunOutput;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use stochint::dataset::ObservationalDataset;
use stochint::nuisance::{FittedNuisance, NuisanceLearner, NuisancePredictor};
use stochint::sie::{
    cross_fit, epsilon_ate, stochastic_propensity, CrossFitted, EstimateReport, NuisanceRecord,
    StochasticDegree,
};
use stochint::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub psi_hat: f64,
    pub tau_sie: f64,
    /// Oracle value `mean(q mu1 + (1 - q) mu0)` under the true propensity.
    pub psi_true: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutcome {
    pub estimate: EstimateReport,
    pub true_ate: Option<f64>,
    pub epsilon_ate: Option<f64>,
    pub psi_true: Option<f64>,
    pub sweep: Vec<SweepRow>,
}

/// `mean(q mu1 + (1 - q) mu0)` with `q` from the true propensity.
pub fn oracle_response(data: &ObservationalDataset, delta: f64) -> Option<f64> {
    let delta = StochasticDegree::new(delta).ok()?;
    let truth = data.truth()?;
    let p = truth.true_propensity.as_ref()?;
    let terms: Vec<f64> = p
        .iter()
        .zip(truth.mu0.iter().zip(&truth.mu1))
        .map(|(&p, (&m0, &m1))| {
            let q = stochastic_propensity(p, delta);
            q * m1 + (1.0 - q) * m0
        })
        .collect();
    Some(mean(&terms))
}

fn records_from_model(
    data: &ObservationalDataset,
    model: &FittedNuisance,
) -> Result<Vec<NuisanceRecord>> {
    let values = model.predict(data)?;
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, v)| NuisanceRecord::new(i, data.treatments()[i], data.outcomes()[i], v))
        .collect())
}

/// Estimates for an already loaded dataset.
pub fn compute(config: &EstimateConfig, data: &ObservationalDataset) -> Result<EstimateOutcome> {
    let fitted = match &config.model {
        Some(path) => {
            let model = FittedNuisance::load(path)?;
            CrossFitted {
                records: records_from_model(data, &model)?,
                folds: Vec::new(),
                k: 0,
                seed: config.seed,
            }
        }
        None => cross_fit(data, config.folds, config.seed, &config.nuisance)?,
    };
    let delta = StochasticDegree::new(config.delta)?;
    let estimate = fitted.report(delta);
    let true_ate = data.true_ate();
    let sweep = match &config.delta_grid {
        Some(grid) => grid
            .points()
            .into_iter()
            .map(|d| {
                let rep = fitted.report(StochasticDegree::new(d)?);
                Ok(SweepRow {
                    delta: d,
                    psi_hat: rep.psi_hat,
                    tau_sie: rep.tau_sie,
                    psi_true: oracle_response(data, d),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(EstimateOutcome {
        epsilon_ate: true_ate.map(|t| epsilon_ate(estimate.tau_ate_contrast, t)),
        psi_true: oracle_response(data, config.delta),
        true_ate,
        estimate,
        sweep,
    })
}

/// Writes `report.json`, `tables/influence.csv`, `tables/sweep.csv` (with a
/// grid) and `models/nuisance.json` (with `save_model`).
pub fn run(config: &EstimateConfig, out: &Path) -> Result<(EstimateOutcome, PathBuf)> {
    let mut config = config.clone();
    config.resolve()?;
    let data = config.data.load()?;
    log::info!(
        "estimating on n={} d={} (k={})",
        data.n(),
        data.d(),
        config.folds
    );
    let outcome = compute(&config, &data)?;

    let mut run = RunOutput::create(out)?;
    run.write_json("config.json", &config)?;
    run.write_json("report.json", &outcome)?;
    let influence = run.path("tables/influence.csv")?;
    outcome.estimate.write_influence_csv(&influence)?;
    if !outcome.sweep.is_empty() {
        run.write_rows("tables/sweep.csv", &outcome.sweep)?;
    }
    if config.save_model {
        let model = config
            .nuisance
            .fit(&data)
            .context("fitting the full-data nuisance model")?;
        let path = run.path("models/nuisance.json")?;
        model.save(&path)?;
    }
    Ok((outcome, run.commit()))
}
