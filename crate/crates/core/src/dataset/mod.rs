//! Observational datasets.
//!
//! An [`ObservationalDataset`] holds `n` units with `d` real covariates, a
//! binary treatment and a real outcome, plus optional [`GroundTruth`]
//! (both potential-outcome means and the true propensity) when the data was
//! generated synthetically. Datasets are validated at construction and
//! immutable afterwards.

mod generate;
mod io;
mod split;

pub use generate::{
    generate_ihdp_like, generate_linear, generate_op_like, generate_op_like_with, DgpConfig,
    OpConfig, OP_COVARIATES,
};
pub use io::{load_csv, load_truth_csv, write_csv, write_truth_csv, ColumnSchema};
pub use split::{split_folds, train_test_indices, train_test_split, FoldAssignment};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv in {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("line {line}, column `{column}`: treatment must be 0 or 1, got `{value}`")]
    NonBinaryTreatment {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column `{column}`: value is not finite")]
    NonFinite { line: u64, column: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("need {min} <= k <= n for fold splitting, got n={n}, k={k}")]
    InvalidFolds { n: usize, k: usize, min: usize },
    #[error("test fraction {fraction} leaves an empty side for n={n}")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("degenerate generator config: {0}")]
    DegenerateConfig(String),
}

/// Oracle quantities known for synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `E[y | x, t = 0]` per unit.
    pub mu0: Vec<f64>,
    /// `E[y | x, t = 1]` per unit.
    pub mu1: Vec<f64>,
    /// `P(t = 1 | x)` per unit, strictly inside `(0, 1)`.
    pub true_propensity: Option<Vec<f64>>,
}

impl GroundTruth {
    /// Sample average treatment effect `mean(mu1 - mu0)`.
    pub fn ate(&self) -> f64 {
        let n = self.mu0.len() as f64;
        self.mu1
            .iter()
            .zip(&self.mu0)
            .map(|(a, b)| a - b)
            .sum::<f64>()
            / n
    }

    fn validate(&self, n: usize) -> Result<(), DatasetError> {
        if self.mu0.len() != n || self.mu1.len() != n {
            return Err(DatasetError::Invalid(format!(
                "ground truth has {} / {} entries for {n} units",
                self.mu0.len(),
                self.mu1.len()
            )));
        }
        if self.mu0.iter().chain(&self.mu1).any(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(
                "ground truth contains non-finite values".into(),
            ));
        }
        if let Some(p) = &self.true_propensity {
            if p.len() != n {
                return Err(DatasetError::Invalid(format!(
                    "true propensity has {} entries for {n} units",
                    p.len()
                )));
            }
            if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(DatasetError::Invalid(
                    "true propensity must lie strictly inside (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }

    fn subset(&self, indices: &[usize]) -> GroundTruth {
        GroundTruth {
            mu0: indices.iter().map(|&i| self.mu0[i]).collect(),
            mu1: indices.iter().map(|&i| self.mu1[i]).collect(),
            true_propensity: self
                .true_propensity
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        }
    }
}

/// `n` units of `(x, t, y)` with row-major covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset {
    covariate_names: Vec<String>,
    covariates: Vec<f64>,
    d: usize,
    treatments: Vec<bool>,
    outcomes: Vec<f64>,
    truth: Option<GroundTruth>,
}

impl ObservationalDataset {
    /// Build a dataset from row-major covariates (`n * d` values).
    pub fn new(
        covariate_names: Vec<String>,
        covariates: Vec<f64>,
        treatments: Vec<bool>,
        outcomes: Vec<f64>,
        truth: Option<GroundTruth>,
    ) -> Result<Self, DatasetError> {
        let d = covariate_names.len();
        let n = treatments.len();
        if n == 0 || d == 0 {
            return Err(DatasetError::Invalid(format!(
                "need n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if covariates.len() != n * d {
            return Err(DatasetError::Invalid(format!(
                "covariate matrix has {} values, expected {n} x {d}",
                covariates.len()
            )));
        }
        if outcomes.len() != n {
            return Err(DatasetError::Invalid(format!(
                "{} outcomes for {n} treatments",
                outcomes.len()
            )));
        }
        if covariates.iter().chain(&outcomes).any(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(
                "covariates and outcomes must be finite".into(),
            ));
        }
        if let Some(t) = &truth {
            t.validate(n)?;
        }
        Ok(Self {
            covariate_names,
            covariates,
            d,
            treatments,
            outcomes,
            truth,
        })
    }

    /// Convenience constructor with covariates named `x1..xd`.
    pub fn from_rows(
        rows: &[Vec<f64>],
        treatments: Vec<bool>,
        outcomes: Vec<f64>,
        truth: Option<GroundTruth>,
    ) -> Result<Self, DatasetError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(DatasetError::Invalid("ragged covariate rows".into()));
        }
        let names = (1..=d).map(|j| format!("x{j}")).collect();
        let flat = rows.iter().flatten().copied().collect();
        Self::new(names, flat, treatments, outcomes, truth)
    }

    pub fn n(&self) -> usize {
        self.treatments.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Covariates of unit `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.covariates.chunks_exact(self.d)
    }

    /// Row-major covariate matrix.
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn treatments(&self) -> &[bool] {
        &self.treatments
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    pub fn n_treated(&self) -> usize {
        self.treatments.iter().filter(|&&t| t).count()
    }

    pub fn treated_fraction(&self) -> f64 {
        self.n_treated() as f64 / self.n() as f64
    }

    /// True sample ATE, when ground truth is present.
    pub fn true_ate(&self) -> Option<f64> {
        self.truth.as_ref().map(GroundTruth::ate)
    }

    /// Attach (or replace) ground truth.
    pub fn with_truth(mut self, truth: GroundTruth) -> Result<Self, DatasetError> {
        truth.validate(self.n())?;
        self.truth = Some(truth);
        Ok(self)
    }

    /// Replace the outcome vector, keeping everything else.
    pub fn with_outcomes(mut self, outcomes: Vec<f64>) -> Result<Self, DatasetError> {
        if outcomes.len() != self.n() || outcomes.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid(
                "replacement outcomes must be finite and of length n".into(),
            ));
        }
        self.outcomes = outcomes;
        Ok(self)
    }

    /// Units at `indices`, in the given order. Ground truth follows along.
    pub fn subset(&self, indices: &[usize]) -> ObservationalDataset {
        let mut covariates = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            covariates.extend_from_slice(self.row(i));
        }
        ObservationalDataset {
            covariate_names: self.covariate_names.clone(),
            covariates,
            d: self.d,
            treatments: indices.iter().map(|&i| self.treatments[i]).collect(),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
            truth: self.truth.as_ref().map(|t| t.subset(indices)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ObservationalDataset {
        ObservationalDataset::from_rows(
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            vec![true, false, true],
            vec![1.0, 0.5, 2.0],
            Some(GroundTruth {
                mu0: vec![0.0, 0.5, 1.0],
                mu1: vec![1.0, 1.5, 2.0],
                true_propensity: Some(vec![0.5, 0.4, 0.6]),
            }),
        )
        .unwrap()
    }

    #[test]
    fn accessors_and_subset() {
        let data = tiny();
        assert_eq!((data.n(), data.d()), (3, 2));
        assert_eq!(data.row(1), &[3.0, 4.0]);
        assert_eq!(data.n_treated(), 2);
        assert_eq!(data.true_ate(), Some(1.0));
        let sub = data.subset(&[2, 0]);
        assert_eq!(sub.row(0), &[5.0, 6.0]);
        assert_eq!(sub.outcomes(), &[2.0, 1.0]);
        assert_eq!(sub.truth().unwrap().mu0, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        assert!(
            ObservationalDataset::from_rows(&[vec![1.0]], vec![true, false], vec![1.0], None)
                .is_err()
        );
        assert!(ObservationalDataset::from_rows(&[], vec![], vec![], None).is_err());
        assert!(
            ObservationalDataset::from_rows(&[vec![f64::NAN]], vec![true], vec![1.0], None)
                .is_err()
        );
    }

    #[test]
    fn rejects_propensity_on_the_boundary() {
        let truth = GroundTruth {
            mu0: vec![0.0],
            mu1: vec![0.0],
            true_propensity: Some(vec![1.0]),
        };
        let r = ObservationalDataset::from_rows(&[vec![1.0]], vec![true], vec![1.0], Some(truth));
        assert!(r.is_err());
    }
}
