use super::SieError;
use crate::dataset::ObservationalDataset;
use crate::nuisance::{fit_propensity, LinearModel, NuisanceError, PropensityConfig};
use serde::{Deserialize, Serialize};

/// One least-squares regression per treatment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsTLearner {
    pub control: LinearModel,
    pub treated: LinearModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsEstimate {
    pub ate: f64,
    /// Either arm needed the ridge fallback.
    pub used_fallback: bool,
}

impl OlsTLearner {
    pub fn fit(data: &ObservationalDataset) -> Result<Self, SieError> {
        let mut arms: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &t) in data.treatments().iter().enumerate() {
            arms[usize::from(t)].push(i);
        }
        let fit_arm = |arm: usize| -> Result<LinearModel, SieError> {
            let idx = &arms[arm];
            if idx.is_empty() {
                return Err(NuisanceError::ArmTooSmall {
                    arm: arm as u8,
                    size: 0,
                    min: 1,
                }
                .into());
            }
            let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
            let y: Vec<f64> = idx.iter().map(|&i| data.outcomes()[i]).collect();
            Ok(LinearModel::fit(&rows, &y, 0.0)?)
        };
        Ok(Self {
            control: fit_arm(0)?,
            treated: fit_arm(1)?,
        })
    }

    /// Mean predicted difference over the units of `data`.
    pub fn ate_on(&self, data: &ObservationalDataset) -> OlsEstimate {
        let n = data.n() as f64;
        let ate = data
            .rows()
            .map(|x| self.treated.predict(x) - self.control.predict(x))
            .sum::<f64>()
            / n;
        OlsEstimate {
            ate,
            used_fallback: self.control.used_fallback || self.treated.used_fallback,
        }
    }
}

/// OLS T-learner fitted and evaluated on the same data.
pub fn baseline_ols(data: &ObservationalDataset) -> Result<OlsEstimate, SieError> {
    Ok(OlsTLearner::fit(data)?.ate_on(data))
}

/// `mean(t y / p) - mean((1 - t) y / (1 - p))` with `p` clipped to
/// `[clip, 1 - clip]`.
pub fn horvitz_thompson(
    treatments: &[bool],
    outcomes: &[f64],
    propensity: &[f64],
    clip: f64,
) -> Result<f64, SieError> {
    let n = treatments.len();
    for len in [outcomes.len(), propensity.len()] {
        if len != n {
            return Err(SieError::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let mut treated = 0.0;
    let mut control = 0.0;
    for ((&t, &y), &p) in treatments.iter().zip(outcomes).zip(propensity) {
        let p = p.clamp(clip, 1.0 - clip);
        if t {
            treated += y / p;
        } else {
            control += y / (1.0 - p);
        }
    }
    Ok((treated - control) / n as f64)
}

/// IPW estimate with the propensity fitted and evaluated on `data`.
pub fn baseline_ipwe(
    data: &ObservationalDataset,
    config: &PropensityConfig,
) -> Result<f64, SieError> {
    ipwe_held_out(data, data, config)
}

/// IPW estimate on `eval` with the propensity model fitted on `train`.
pub fn ipwe_held_out(
    train: &ObservationalDataset,
    eval: &ObservationalDataset,
    config: &PropensityConfig,
) -> Result<f64, SieError> {
    let model = fit_propensity(train, config)?;
    let p = model.predict_all(eval);
    horvitz_thompson(eval.treatments(), eval.outcomes(), &p, config.clip)
}
