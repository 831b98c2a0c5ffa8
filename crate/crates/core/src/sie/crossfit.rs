use super::{
    influence, m_term, shifted, EstimateReport, InfluenceRecord, SieError, StochasticDegree,
};
use crate::dataset::{split_folds, ObservationalDataset};
use crate::nuisance::{FitSummary, NuisanceLearner, NuisancePredictor, NuisanceValues};
use crate::stats::mean;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Out-of-fold nuisance predictions for one unit, with the m-terms that do
/// not depend on the stochastic degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceRecord {
    pub unit_index: usize,
    pub treated: bool,
    pub outcome: f64,
    pub p_hat: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub m0: f64,
    pub m1: f64,
}

impl NuisanceRecord {
    pub fn new(unit_index: usize, treated: bool, outcome: f64, v: NuisanceValues) -> Self {
        Self {
            unit_index,
            treated,
            outcome,
            p_hat: v.p_hat,
            mu0: v.mu0,
            mu1: v.mu1,
            m0: m_term(treated, outcome, v.mu0, v.p_hat, false),
            m1: m_term(treated, outcome, v.mu1, v.p_hat, true),
        }
    }

    /// `phi(z, delta)` for this unit.
    #[inline]
    pub fn phi(&self, delta: f64) -> f64 {
        influence(shifted(self.p_hat, delta), self.m1, self.m0)
    }

    pub fn influence_record(&self, delta: StochasticDegree) -> InfluenceRecord {
        let q = shifted(self.p_hat, delta.value());
        InfluenceRecord {
            unit_index: self.unit_index,
            q,
            m1: self.m1,
            m0: self.m0,
            phi: influence(q, self.m1, self.m0),
            tau_plugin: self.p_hat * self.mu1 + (1.0 - self.p_hat) * self.mu0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub n_train: usize,
    pub n_train_treated: usize,
    pub n_eval: usize,
    pub fit: FitSummary,
}

/// Cross-fitted nuisances for every unit of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitted {
    pub records: Vec<NuisanceRecord>,
    pub folds: Vec<FoldDiagnostics>,
    pub k: usize,
    pub seed: u64,
}

/// `mean(mu1 - mu0)` over the records.
pub fn ate_contrast(records: &[NuisanceRecord]) -> f64 {
    let diffs: Vec<f64> = records.iter().map(|r| r.mu1 - r.mu0).collect();
    mean(&diffs)
}

fn predict_records<P: NuisancePredictor>(
    model: &P,
    eval: &ObservationalDataset,
    indices: &[usize],
) -> Result<Vec<NuisanceRecord>, crate::nuisance::NuisanceError> {
    let values = model.predict(eval)?;
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(j, v)| NuisanceRecord::new(indices[j], eval.treatments()[j], eval.outcomes()[j], v))
        .collect())
}

/// Split into `k` folds; for each fold fit the nuisances on the other folds
/// and predict on the held-out fold.
pub fn cross_fit<L: NuisanceLearner>(
    data: &ObservationalDataset,
    k: usize,
    seed: u64,
    learner: &L,
) -> Result<CrossFitted, SieError> {
    let folds = split_folds(data.n(), k, seed)?;
    for f in 0..k {
        let train = folds.complement(f);
        let treated = train.iter().filter(|&&i| data.treatments()[i]).count();
        if treated == 0 {
            return Err(SieError::DegenerateFold { fold: f, arm: 1 });
        }
        if treated == train.len() {
            return Err(SieError::DegenerateFold { fold: f, arm: 0 });
        }
    }
    let per_fold: Vec<Result<(Vec<NuisanceRecord>, FoldDiagnostics), SieError>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx = folds.complement(f);
            let eval_idx = folds.held_out(f);
            let train = data.subset(&train_idx);
            let eval = data.subset(&eval_idx);
            let wrap = |source| SieError::Fold { fold: f, source };
            let model = learner.fit(&train).map_err(wrap)?;
            let records = predict_records(&model, &eval, &eval_idx).map_err(wrap)?;
            let diag = FoldDiagnostics {
                fold: f,
                n_train: train.n(),
                n_train_treated: train.n_treated(),
                n_eval: eval.n(),
                fit: model.summary(),
            };
            Ok((records, diag))
        })
        .collect();

    let mut slots: Vec<Option<NuisanceRecord>> = vec![None; data.n()];
    let mut diagnostics = Vec::with_capacity(k);
    for result in per_fold {
        let (records, diag) = result?;
        for r in records {
            slots[r.unit_index] = Some(r);
        }
        diagnostics.push(diag);
    }
    Ok(CrossFitted {
        records: slots
            .into_iter()
            .map(|r| r.expect("folds cover every unit"))
            .collect(),
        folds: diagnostics,
        k,
        seed,
    })
}

/// Fit on `train` and predict on every unit of `eval`.
pub fn evaluate_held_out<L: NuisanceLearner>(
    train: &ObservationalDataset,
    eval: &ObservationalDataset,
    learner: &L,
) -> Result<Vec<NuisanceRecord>, SieError> {
    let model = learner.fit(train)?;
    let indices: Vec<usize> = (0..eval.n()).collect();
    Ok(predict_records(&model, eval, &indices)?)
}

impl CrossFitted {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn influence_records(&self, delta: StochasticDegree) -> Vec<InfluenceRecord> {
        self.records
            .iter()
            .map(|r| r.influence_record(delta))
            .collect()
    }

    pub fn ate_contrast(&self) -> f64 {
        ate_contrast(&self.records)
    }

    /// `mean_i phi(z_i, delta_i)`.
    pub fn expected_response(&self, deltas: &[f64]) -> Result<f64, SieError> {
        if deltas.len() != self.n() {
            return Err(SieError::LengthMismatch {
                expected: self.n(),
                found: deltas.len(),
            });
        }
        if let Some(&bad) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(SieError::InvalidDegree(bad));
        }
        let phi: Vec<f64> = self
            .records
            .iter()
            .zip(deltas)
            .map(|(r, &d)| r.phi(d))
            .collect();
        Ok(mean(&phi))
    }

    pub fn report(&self, delta: StochasticDegree) -> EstimateReport {
        let records = self.influence_records(delta);
        let phi: Vec<f64> = records.iter().map(|r| r.phi).collect();
        let y: Vec<f64> = self.records.iter().map(|r| r.outcome).collect();
        let centered: Vec<f64> = phi.iter().zip(&y).map(|(p, y)| p - y).collect();
        let plugin: Vec<f64> = records.iter().map(|r| r.tau_plugin).collect();
        EstimateReport {
            version: crate::FORMAT_VERSION,
            delta,
            k: self.k,
            seed: self.seed,
            n: self.n(),
            tau_ate_plugin: mean(&plugin),
            tau_ate_contrast: self.ate_contrast(),
            tau_sie: mean(&centered),
            psi_hat: mean(&phi),
            mean_outcome: mean(&y),
            per_fold: self.folds.clone(),
            records,
        }
    }
}
