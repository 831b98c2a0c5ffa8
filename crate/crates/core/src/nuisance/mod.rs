//! Nuisance functions: the propensity score `p(x)` and the potential-outcome
//! regressions `mu(x, 0)`, `mu(x, 1)`.

mod basis;
mod linear;
mod logistic;
mod outcome;
mod propensity;
mod tree;

pub use basis::{BasisExpansion, BasisKind};
pub use linear::{LinearModel, RIDGE_FALLBACK};
pub use logistic::{newton_solve, LogisticFit, LogisticObjective, SolverConfig};
pub use outcome::{
    fit_outcome, OutcomeArchitecture, OutcomeConfig, OutcomeKind, OutcomeModel, Regressor,
};
pub use propensity::{fit_propensity, propensity_objective, PropensityConfig, PropensityModel};
pub use tree::{BoostingParams, GradientBoostedTrees, RegressionTree};

use crate::dataset::ObservationalDataset;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum NuisanceError {
    #[error("treatment has a single class; propensity is not identifiable")]
    SingleClass,
    #[error("logistic solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("arm t={arm} has {size} units, need at least {min}")]
    ArmTooSmall { arm: u8, size: usize, min: usize },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("singular system in {0}")]
    Singular(&'static str),
    #[error("oracle nuisances need ground truth{0}")]
    MissingTruth(&'static str),
    #[error("invalid nuisance configuration: {0}")]
    InvalidConfig(String),
    #[error("model file has format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
}

/// Nuisance predictions for one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceValues {
    pub p_hat: f64,
    pub mu0: f64,
    pub mu1: f64,
}

/// Diagnostics about one nuisance fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub propensity_iterations: Option<usize>,
    /// Final training MSE of the outcome regressors (control, treated) or
    /// of the joint model.
    pub outcome_train_mse: Vec<f64>,
    pub used_ridge_fallback: bool,
}

pub trait NuisancePredictor {
    fn predict(&self, data: &ObservationalDataset) -> Result<Vec<NuisanceValues>, NuisanceError>;

    fn summary(&self) -> FitSummary {
        FitSummary::default()
    }
}

/// Something that turns a training sample into a [`NuisancePredictor`].
pub trait NuisanceLearner: Sync {
    type Fitted: NuisancePredictor + Send;

    fn fit(&self, train: &ObservationalDataset) -> Result<Self::Fitted, NuisanceError>;
}

/// Logistic propensity plus outcome regression.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NuisanceConfig {
    pub propensity: PropensityConfig,
    pub outcome: OutcomeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedNuisance {
    pub version: u32,
    pub propensity: PropensityModel,
    pub outcome: OutcomeModel,
}

impl FittedNuisance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, NuisanceError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let bad = |e: serde_json::Error| NuisanceError::ModelFile {
            path: "<string>".into(),
            message: e.to_string(),
        };
        let header: Header = serde_json::from_str(text).map_err(bad)?;
        if header.version != crate::FORMAT_VERSION {
            return Err(NuisanceError::Version {
                found: header.version,
                expected: crate::FORMAT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(bad)
    }

    pub fn save(&self, path: &Path) -> Result<(), NuisanceError> {
        std::fs::write(path, self.to_json()).map_err(|e| NuisanceError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, NuisanceError> {
        let text = std::fs::read_to_string(path).map_err(|e| NuisanceError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            NuisanceError::ModelFile { message, .. } => NuisanceError::ModelFile {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

impl NuisancePredictor for FittedNuisance {
    fn predict(&self, data: &ObservationalDataset) -> Result<Vec<NuisanceValues>, NuisanceError> {
        let values: Vec<NuisanceValues> = data
            .rows()
            .map(|x| NuisanceValues {
                p_hat: self.propensity.predict(x),
                mu0: self.outcome.predict(x, false),
                mu1: self.outcome.predict(x, true),
            })
            .collect();
        if values
            .iter()
            .any(|v| !(v.mu0.is_finite() && v.mu1.is_finite()))
        {
            return Err(NuisanceError::NonFinite("outcome predictions"));
        }
        Ok(values)
    }

    fn summary(&self) -> FitSummary {
        let (outcome_train_mse, used_ridge_fallback) = match &self.outcome {
            OutcomeModel::PerArm { control, treated } => {
                let mse = [control, treated]
                    .iter()
                    .filter_map(|r| r.final_train_mse())
                    .collect();
                let fallback = [control, treated]
                    .iter()
                    .any(|r| matches!(r, Regressor::RidgeLinear(m) if m.used_fallback));
                (mse, fallback)
            }
            OutcomeModel::Joint { model } => (
                model.final_train_mse().into_iter().collect(),
                matches!(model, Regressor::RidgeLinear(m) if m.used_fallback),
            ),
        };
        FitSummary {
            propensity_iterations: Some(self.propensity.iterations),
            outcome_train_mse,
            used_ridge_fallback,
        }
    }
}

impl NuisanceLearner for NuisanceConfig {
    type Fitted = FittedNuisance;

    fn fit(&self, train: &ObservationalDataset) -> Result<FittedNuisance, NuisanceError> {
        let (propensity, outcome) = rayon::join(
            || fit_propensity(train, &self.propensity),
            || fit_outcome(train, &self.outcome),
        );
        Ok(FittedNuisance {
            version: crate::FORMAT_VERSION,
            propensity: propensity?,
            outcome: outcome?,
        })
    }
}

/// Which propensity an [`OracleNuisance`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OraclePropensity {
    /// `true_propensity` from the ground truth.
    True,
    /// The same value for every unit.
    Constant(f64),
}

/// Reads the nuisances from the ground truth of the evaluated units.
/// Fitting is a no-op.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleNuisance {
    pub propensity: OraclePropensity,
}

impl OracleNuisance {
    pub fn exact() -> Self {
        Self {
            propensity: OraclePropensity::True,
        }
    }

    pub fn with_constant_propensity(p: f64) -> Self {
        Self {
            propensity: OraclePropensity::Constant(p),
        }
    }
}

impl NuisancePredictor for OracleNuisance {
    fn predict(&self, data: &ObservationalDataset) -> Result<Vec<NuisanceValues>, NuisanceError> {
        let truth = data.truth().ok_or(NuisanceError::MissingTruth(""))?;
        let p: Vec<f64> = match self.propensity {
            OraclePropensity::True => truth
                .true_propensity
                .clone()
                .ok_or(NuisanceError::MissingTruth(" with true propensities"))?,
            OraclePropensity::Constant(c) => {
                if !(c > 0.0 && c < 1.0) {
                    return Err(NuisanceError::InvalidConfig(format!(
                        "constant propensity {c} outside (0, 1)"
                    )));
                }
                vec![c; data.n()]
            }
        };
        Ok(p.iter()
            .zip(truth.mu0.iter().zip(&truth.mu1))
            .map(|(&p_hat, (&mu0, &mu1))| NuisanceValues { p_hat, mu0, mu1 })
            .collect())
    }
}

impl NuisanceLearner for OracleNuisance {
    type Fitted = OracleNuisance;

    fn fit(&self, _train: &ObservationalDataset) -> Result<OracleNuisance, NuisanceError> {
        Ok(*self)
    }
}
