//! Least squares with an optional ridge penalty on the slopes.

use super::NuisanceError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Penalty used when the unpenalised normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// The normal equations were singular and [`RIDGE_FALLBACK`] was added.
    pub used_fallback: bool,
}

impl LinearModel {
    /// Minimise `|y - a - X b|^2 + penalty * |b|^2` (intercept unpenalised).
    pub fn fit(rows: &[&[f64]], y: &[f64], penalty: f64) -> Result<Self, NuisanceError> {
        let n = y.len();
        if n == 0 || rows.len() != n {
            return Err(NuisanceError::InvalidConfig(
                "empty regression problem".into(),
            ));
        }
        if !(penalty >= 0.0 && penalty.is_finite()) {
            return Err(NuisanceError::InvalidConfig(format!(
                "ridge penalty {penalty}"
            )));
        }
        let d = rows[0].len();
        let nf = n as f64;
        let mut x_mean = vec![0.0; d];
        for r in rows {
            for (m, v) in x_mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= nf);
        let y_mean = y.iter().sum::<f64>() / nf;

        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let mut xc = vec![0.0; d];
        for (r, &yi) in rows.iter().zip(y) {
            for j in 0..d {
                xc[j] = r[j] - x_mean[j];
            }
            let yc = yi - y_mean;
            for a in 0..d {
                rhs[a] += xc[a] * yc;
                for b in a..d {
                    gram[(a, b)] += xc[a] * xc[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }

        let max_diag = (0..d).map(|a| gram[(a, a)]).fold(0.0, f64::max);
        let solve = |lambda: f64| {
            let mut m = gram.clone();
            for a in 0..d {
                m[(a, a)] += lambda;
            }
            let chol = m.cholesky()?;
            // pivots at rounding level mean a rank-deficient design
            let floor = 1e-13 * max_diag;
            if chol.l_dirty().diagonal().iter().any(|&l| l * l <= floor) {
                return None;
            }
            Some(chol.solve(&rhs))
        };
        let (coef, used_fallback) = match solve(penalty) {
            Some(c) if c.iter().all(|v| v.is_finite()) => (c, false),
            _ => {
                let mut m = gram.clone();
                for a in 0..d {
                    m[(a, a)] += penalty + RIDGE_FALLBACK;
                }
                let c = m
                    .cholesky()
                    .map(|c| c.solve(&rhs))
                    .ok_or(NuisanceError::Singular("least-squares normal equations"))?;
                (c, true)
            }
        };
        let coef: Vec<f64> = coef.iter().copied().collect();
        let intercept = y_mean - coef.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        Ok(Self {
            intercept,
            coef,
            used_fallback,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_recovery() {
        let data: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.5, (i % 3) as f64])
            .collect();
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let y: Vec<f64> = data.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let m = LinearModel::fit(&rows, &y, 0.0).unwrap();
        assert!(!m.used_fallback);
        assert!((m.intercept - 1.5).abs() < 1e-10);
        assert!((m.coef[0] - 2.0).abs() < 1e-10);
        assert!((m.coef[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn collinear_design_uses_fallback() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 * i as f64).collect();
        let m = LinearModel::fit(&rows, &y, 0.0).unwrap();
        assert!(m.used_fallback);
        for (r, yi) in rows.iter().zip(&y) {
            assert!((m.predict(r) - yi).abs() < 1e-6);
        }
    }
}
