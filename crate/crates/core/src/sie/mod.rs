//! Stochastic intervention effects.
//!
//! An odds-shift intervention of degree `delta` replaces the propensity
//! `p(x)` by `q(x) = delta p / (delta p + 1 - p)`. The counterfactual mean
//! outcome under that policy is estimated by the mean of the influence values
//!
//! ```text
//! phi = q m1 + (1 - q) m0
//! m_a = 1[t = a] (y - mu(x, a)) / P(t = a | x) + mu(x, a)
//! ```
//!
//! with nuisances cross-fitted over `k` folds.

mod baselines;
mod crossfit;

pub use baselines::{
    baseline_ipwe, baseline_ols, horvitz_thompson, ipwe_held_out, OlsEstimate, OlsTLearner,
};
pub use crossfit::{
    ate_contrast, cross_fit, evaluate_held_out, CrossFitted, FoldDiagnostics, NuisanceRecord,
};

use crate::dataset::{DatasetError, ObservationalDataset};
use crate::nuisance::{NuisanceError, NuisanceLearner};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SieError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("nuisance fit failed")]
    Nuisance(#[from] NuisanceError),
    #[error("fold {fold}")]
    Fold {
        fold: usize,
        #[source]
        source: NuisanceError,
    },
    #[error("training complement of fold {fold} has no units with t={arm}")]
    DegenerateFold { fold: usize, arm: u8 },
    #[error("stochastic degree must be finite and >= 0, got {0}")]
    InvalidDegree(f64),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

/// Multiplicative shift `delta >= 0` on the treatment odds. `1` leaves the
/// observational policy unchanged.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StochasticDegree(f64);

impl StochasticDegree {
    pub const OBSERVED: StochasticDegree = StochasticDegree(1.0);

    pub fn new(delta: f64) -> Result<Self, SieError> {
        if delta.is_finite() && delta >= 0.0 {
            Ok(Self(delta))
        } else {
            Err(SieError::InvalidDegree(delta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for StochasticDegree {
    type Error = SieError;

    fn try_from(v: f64) -> Result<Self, SieError> {
        Self::new(v)
    }
}

impl From<StochasticDegree> for f64 {
    fn from(d: StochasticDegree) -> f64 {
        d.0
    }
}

/// `q = delta p / (delta p + 1 - p)` for `p` in `(0, 1)`.
pub fn stochastic_propensity(p_hat: f64, delta: StochasticDegree) -> f64 {
    shifted(p_hat, delta.0)
}

#[inline]
pub(crate) fn shifted(p: f64, delta: f64) -> f64 {
    if delta == 1.0 {
        // p + 1 - p is not always exactly 1 in floating point
        return p;
    }
    let num = delta * p;
    num / (num + 1.0 - p)
}

/// `1[t = arm] (y - mu_arm) / P(t = arm) + mu_arm`.
pub fn m_term(t: bool, y: f64, mu_arm: f64, p_hat: f64, arm: bool) -> f64 {
    if t != arm {
        return mu_arm;
    }
    let p_arm = if arm { p_hat } else { 1.0 - p_hat };
    (y - mu_arm) / p_arm + mu_arm
}

/// `phi = q m1 + (1 - q) m0`.
#[inline]
pub fn influence(q: f64, m1: f64, m0: f64) -> f64 {
    q * m1 + (1.0 - q) * m0
}

/// `|estimated - truth|`.
pub fn epsilon_ate(estimated: f64, truth: f64) -> f64 {
    (estimated - truth).abs()
}

/// Per-unit terms of the estimator at one stochastic degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRecord {
    pub unit_index: usize,
    pub q: f64,
    pub m1: f64,
    pub m0: f64,
    pub phi: f64,
    /// `p mu1 + (1 - p) mu0`.
    pub tau_plugin: f64,
}

/// Point estimates from one cross-fitted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub version: u32,
    pub delta: StochasticDegree,
    pub k: usize,
    pub seed: u64,
    pub n: usize,
    /// `mean(p mu1 + (1 - p) mu0)`: the propensity-weighted outcome average.
    pub tau_ate_plugin: f64,
    /// `mean(mu1 - mu0)`: the treatment contrast used for ATE error metrics.
    pub tau_ate_contrast: f64,
    /// `mean(phi - y)`.
    pub tau_sie: f64,
    /// `mean(phi)`.
    pub psi_hat: f64,
    pub mean_outcome: f64,
    pub per_fold: Vec<FoldDiagnostics>,
    #[serde(skip)]
    pub records: Vec<InfluenceRecord>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Write the per-unit table with columns
    /// `unit_index, q, m1, m0, phi, tau_plugin`.
    pub fn write_influence_csv(&self, path: &Path) -> Result<(), SieError> {
        let err = |e: csv::Error| SieError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        for r in &self.records {
            w.serialize(r).map_err(err)?;
        }
        w.flush().map_err(|e| err(e.into()))
    }
}

/// Cross-fit the nuisances and report all estimates at `delta`.
pub fn estimate_sie<L: NuisanceLearner>(
    data: &ObservationalDataset,
    delta: StochasticDegree,
    k: usize,
    seed: u64,
    learner: &L,
) -> Result<EstimateReport, SieError> {
    Ok(cross_fit(data, k, seed, learner)?.report(delta))
}

/// Cross-fitted `mean(mu(x, 1) - mu(x, 0))`.
pub fn estimate_ate_difference<L: NuisanceLearner>(
    data: &ObservationalDataset,
    k: usize,
    seed: u64,
    learner: &L,
) -> Result<f64, SieError> {
    Ok(cross_fit(data, k, seed, learner)?.ate_contrast())
}

/// Cross-fitted `mean_i phi(z_i, delta_i)` with one degree per unit.
pub fn expected_response<L: NuisanceLearner>(
    data: &ObservationalDataset,
    deltas: &[f64],
    k: usize,
    seed: u64,
    learner: &L,
) -> Result<f64, SieError> {
    if deltas.len() != data.n() {
        return Err(SieError::LengthMismatch {
            expected: data.n(),
            found: deltas.len(),
        });
    }
    cross_fit(data, k, seed, learner)?.expected_response(deltas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(v: f64) -> StochasticDegree {
        StochasticDegree::new(v).unwrap()
    }

    #[test]
    fn stochastic_propensity_examples() {
        for p in [0.01, 0.2, 0.5, 0.93] {
            assert_eq!(stochastic_propensity(p, StochasticDegree::OBSERVED), p);
            assert_eq!(stochastic_propensity(p, deg(0.0)), 0.0);
            assert!(stochastic_propensity(p, deg(1e6)) > 0.99);
        }
        assert!((stochastic_propensity(0.5, deg(1.5)) - 0.6).abs() < 1e-12);
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert_eq!(stochastic_propensity(p, StochasticDegree::OBSERVED), p);
        }
    }

    #[test]
    fn invalid_degrees_rejected() {
        assert!(StochasticDegree::new(-0.1).is_err());
        assert!(StochasticDegree::new(f64::NAN).is_err());
        assert!(StochasticDegree::new(f64::INFINITY).is_err());
        assert!(serde_json::from_str::<StochasticDegree>("-1.0").is_err());
        assert_eq!(
            serde_json::from_str::<StochasticDegree>("2.5").unwrap(),
            deg(2.5)
        );
    }

    #[test]
    fn m_term_examples() {
        assert_eq!(m_term(false, 7.0, 1.25, 0.3, true), 1.25);
        assert_eq!(m_term(true, 2.0, 1.0, 0.5, true), 3.0);
        assert_eq!(m_term(true, 1.75, 1.75, 0.2, true), 1.75);
        // control arm divides by 1 - p
        assert!((m_term(false, 2.0, 1.0, 0.75, false) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn influence_examples() {
        assert_eq!(influence(1.0, 3.0, 1.0), 3.0);
        assert_eq!(influence(0.0, 3.0, 1.0), 1.0);
        assert_eq!(influence(0.5, 3.0, 1.0), 2.0);
        assert!((influence(0.6, 4.2, 4.2) - 4.2).abs() < 1e-15);
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_ate(2.0, 2.0), 0.0);
        assert_eq!(epsilon_ate(1.5, 2.0), 0.5);
    }
}
