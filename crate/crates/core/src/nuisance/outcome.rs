use super::linear::LinearModel;
use super::tree::{BoostingParams, GradientBoostedTrees};
use super::NuisanceError;
use crate::dataset::ObservationalDataset;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    BoostedTrees,
    RidgeLinear,
}

/// Per-arm models (one regressor per treatment arm) or a single regressor on
/// `(x, t)` with the treatment appended as the last feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeArchitecture {
    PerArm,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeConfig {
    pub kind: OutcomeKind,
    pub architecture: OutcomeArchitecture,
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub ridge_penalty: f64,
    /// Minimum units per arm for per-arm fitting.
    pub min_arm_size: usize,
}

impl Default for OutcomeConfig {
    fn default() -> Self {
        Self {
            kind: OutcomeKind::BoostedTrees,
            architecture: OutcomeArchitecture::PerArm,
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            ridge_penalty: 1e-6,
            min_arm_size: 10,
        }
    }
}

impl OutcomeConfig {
    fn boosting(&self) -> BoostingParams {
        BoostingParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
        }
    }

    fn validate(&self) -> Result<(), NuisanceError> {
        if self.kind == OutcomeKind::BoostedTrees
            && !(self.learning_rate > 0.0 && self.learning_rate <= 1.0)
        {
            return Err(NuisanceError::InvalidConfig(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.kind == OutcomeKind::BoostedTrees && self.max_depth == 0 && self.n_trees > 0 {
            return Err(NuisanceError::InvalidConfig(
                "max_depth must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    BoostedTrees(GradientBoostedTrees),
    RidgeLinear(LinearModel),
}

impl Regressor {
    fn fit(rows: &[&[f64]], y: &[f64], config: &OutcomeConfig) -> Result<Self, NuisanceError> {
        Ok(match config.kind {
            OutcomeKind::BoostedTrees => {
                Regressor::BoostedTrees(GradientBoostedTrees::fit(rows, y, &config.boosting()))
            }
            OutcomeKind::RidgeLinear => {
                Regressor::RidgeLinear(LinearModel::fit(rows, y, config.ridge_penalty)?)
            }
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::BoostedTrees(m) => m.predict(x),
            Regressor::RidgeLinear(m) => m.predict(x),
        }
    }

    /// Training MSE after the last boosting round (trees only).
    pub fn final_train_mse(&self) -> Option<f64> {
        match self {
            Regressor::BoostedTrees(m) => m.train_mse.last().copied(),
            Regressor::RidgeLinear(_) => None,
        }
    }
}

/// Potential-outcome model `mu(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum OutcomeModel {
    PerArm {
        control: Regressor,
        treated: Regressor,
    },
    Joint {
        model: Regressor,
    },
}

impl OutcomeModel {
    pub fn predict(&self, x: &[f64], treated: bool) -> f64 {
        match self {
            OutcomeModel::PerArm {
                control,
                treated: t,
            } => {
                if treated {
                    t.predict(x)
                } else {
                    control.predict(x)
                }
            }
            OutcomeModel::Joint { model } => {
                let mut z = Vec::with_capacity(x.len() + 1);
                z.extend_from_slice(x);
                z.push(if treated { 1.0 } else { 0.0 });
                model.predict(&z)
            }
        }
    }
}

/// Fit `mu(x, t)` on `data`.
pub fn fit_outcome(
    data: &ObservationalDataset,
    config: &OutcomeConfig,
) -> Result<OutcomeModel, NuisanceError> {
    config.validate()?;
    match config.architecture {
        OutcomeArchitecture::PerArm => {
            let mut arms = [Vec::new(), Vec::new()];
            for (i, &t) in data.treatments().iter().enumerate() {
                arms[usize::from(t)].push(i);
            }
            let mut fitted = Vec::with_capacity(2);
            for (arm, idx) in arms.iter().enumerate() {
                if idx.is_empty() || idx.len() < config.min_arm_size {
                    return Err(NuisanceError::ArmTooSmall {
                        arm: arm as u8,
                        size: idx.len(),
                        min: config.min_arm_size.max(1),
                    });
                }
                let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
                let y: Vec<f64> = idx.iter().map(|&i| data.outcomes()[i]).collect();
                fitted.push(Regressor::fit(&rows, &y, config)?);
            }
            let treated = fitted.pop().expect("two arms");
            let control = fitted.pop().expect("two arms");
            Ok(OutcomeModel::PerArm { control, treated })
        }
        OutcomeArchitecture::Joint => {
            let augmented: Vec<Vec<f64>> = data
                .rows()
                .zip(data.treatments())
                .map(|(x, &t)| {
                    let mut z = x.to_vec();
                    z.push(if t { 1.0 } else { 0.0 });
                    z
                })
                .collect();
            let rows: Vec<&[f64]> = augmented.iter().map(Vec::as_slice).collect();
            Ok(OutcomeModel::Joint {
                model: Regressor::fit(&rows, data.outcomes(), config)?,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_ihdp_like, DgpConfig};

    fn grid(n: usize) -> ObservationalDataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![i as f64 / n as f64, (i % 5) as f64])
            .collect();
        let t: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        ObservationalDataset::from_rows(&rows, t, y, None).unwrap()
    }

    #[test]
    fn constant_target_is_reproduced() {
        let data = grid(60).with_outcomes(vec![3.25; 60]).unwrap();
        for kind in [OutcomeKind::BoostedTrees, OutcomeKind::RidgeLinear] {
            for architecture in [OutcomeArchitecture::PerArm, OutcomeArchitecture::Joint] {
                let cfg = OutcomeConfig {
                    kind,
                    architecture,
                    ..OutcomeConfig::default()
                };
                let m = fit_outcome(&data, &cfg).unwrap();
                for x in [[0.0, 0.0], [10.0, -3.0]] {
                    for t in [false, true] {
                        assert!((m.predict(&x, t) - 3.25).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn ridge_recovers_a_linear_slope() {
        let cfg = OutcomeConfig {
            kind: OutcomeKind::RidgeLinear,
            ..OutcomeConfig::default()
        };
        let m = fit_outcome(&grid(90), &cfg).unwrap();
        let OutcomeModel::PerArm { control, treated } = &m else {
            panic!("per-arm expected")
        };
        for r in [control, treated] {
            let Regressor::RidgeLinear(lin) = r else {
                panic!()
            };
            assert!((lin.coef[0] - 2.0).abs() < 1e-4);
            assert!(lin.coef[1].abs() < 1e-6);
            assert!(lin.intercept.abs() < 1e-4);
        }
    }

    #[test]
    fn per_arm_routing() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let t: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let y: Vec<f64> = t.iter().map(|&t| if t { 10.0 } else { -10.0 }).collect();
        let data = ObservationalDataset::from_rows(&rows, t, y, None).unwrap();
        let m = fit_outcome(&data, &OutcomeConfig::default()).unwrap();
        assert_eq!(m.predict(&[3.0], true), 10.0);
        assert_eq!(m.predict(&[3.0], false), -10.0);
        assert_eq!(m.predict(&[3.0], true), m.predict(&[3.0], true));
    }

    #[test]
    fn small_arm_is_rejected() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let t: Vec<bool> = (0..30).map(|i| i < 5).collect();
        let data = ObservationalDataset::from_rows(&rows, t, vec![0.0; 30], None).unwrap();
        assert!(matches!(
            fit_outcome(&data, &OutcomeConfig::default()),
            Err(NuisanceError::ArmTooSmall {
                arm: 1,
                size: 5,
                ..
            })
        ));
    }

    #[test]
    fn boosted_trees_fit_noiseless_nonlinear_surface() {
        let cfg = DgpConfig {
            noise_scale: 0.0,
            treated_fraction_target: 0.5,
            ..DgpConfig::default()
        };
        let data = generate_ihdp_like(2000, 5, 21, &cfg).unwrap();
        let m = fit_outcome(&data, &OutcomeConfig::default()).unwrap();
        let OutcomeModel::PerArm { control, treated } = &m else {
            panic!()
        };
        for (arm, reg) in [(false, control), (true, treated)] {
            let Regressor::BoostedTrees(gb) = reg else {
                panic!()
            };
            for w in gb.train_mse.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let ys: Vec<f64> = data
                .treatments()
                .iter()
                .zip(data.outcomes())
                .filter(|(t, _)| **t == arm)
                .map(|(_, y)| *y)
                .collect();
            let sd = crate::stats::std_dev(&ys);
            let rmse = gb.train_mse.last().unwrap().sqrt();
            assert!(rmse < 0.1 * sd, "arm {arm}: rmse {rmse} vs sd {sd}");
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let data = generate_ihdp_like(300, 4, 2, &DgpConfig::default()).unwrap();
        let a = fit_outcome(&data, &OutcomeConfig::default()).unwrap();
        let b = fit_outcome(&data, &OutcomeConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
