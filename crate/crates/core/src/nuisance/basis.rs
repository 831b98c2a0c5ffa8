//! Basis expansions `g_1(x), ..., g_s(x)` for the propensity logit.
//!
//! Every expansion starts with a constant intercept feature.

use super::NuisanceError;
use crate::rng::stream_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Which expansion to fit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    /// `(1, x_1, ..., x_d)`.
    Raw,
    /// Intercept, linear terms, squares and all pairwise products.
    #[default]
    Polynomial2,
    /// Intercept plus Gaussian bumps around k-means centres.
    Rbf { centers: usize, seed: u64 },
}

/// A fitted, deterministic feature map from `R^d` to `R^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisExpansion {
    Raw {
        input_dim: usize,
    },
    Polynomial2 {
        input_dim: usize,
    },
    Rbf {
        input_dim: usize,
        centers: Vec<Vec<f64>>,
        /// Bandwidth `sigma` in `exp(-|x - c|^2 / (2 sigma^2))`.
        scale: f64,
    },
}

const KMEANS_SUBSAMPLE: usize = 1000;
const KMEANS_ITERATIONS: usize = 25;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl BasisExpansion {
    /// Fit the expansion to row-major `rows` (only RBF needs data).
    pub fn fit(kind: BasisKind, rows: &[&[f64]]) -> Result<Self, NuisanceError> {
        let input_dim = rows.first().map_or(0, |r| r.len());
        if input_dim == 0 {
            return Err(NuisanceError::InvalidConfig(
                "empty covariate matrix".into(),
            ));
        }
        Ok(match kind {
            BasisKind::Raw => BasisExpansion::Raw { input_dim },
            BasisKind::Polynomial2 => BasisExpansion::Polynomial2 { input_dim },
            BasisKind::Rbf { centers, seed } => {
                if centers == 0 {
                    return Err(NuisanceError::InvalidConfig(
                        "rbf basis needs at least one centre".into(),
                    ));
                }
                let (centers, scale) = kmeans_centers(rows, centers, seed);
                BasisExpansion::Rbf {
                    input_dim,
                    centers,
                    scale,
                }
            }
        })
    }

    /// RBF expansion with explicit centres.
    pub fn rbf(centers: Vec<Vec<f64>>, scale: f64) -> Result<Self, NuisanceError> {
        let input_dim = centers.first().map_or(0, Vec::len);
        if input_dim == 0 || centers.iter().any(|c| c.len() != input_dim) {
            return Err(NuisanceError::InvalidConfig(
                "ragged or empty rbf centres".into(),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(NuisanceError::InvalidConfig(format!("rbf scale {scale}")));
        }
        Ok(BasisExpansion::Rbf {
            input_dim,
            centers,
            scale,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            BasisExpansion::Raw { input_dim }
            | BasisExpansion::Polynomial2 { input_dim }
            | BasisExpansion::Rbf { input_dim, .. } => *input_dim,
        }
    }

    /// Number of output features `s`.
    pub fn output_dim(&self) -> usize {
        let d = self.input_dim();
        match self {
            BasisExpansion::Raw { .. } => 1 + d,
            BasisExpansion::Polynomial2 { .. } => 1 + d + d * (d + 1) / 2,
            BasisExpansion::Rbf { centers, .. } => 1 + centers.len(),
        }
    }

    /// Expand a single covariate vector.
    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>, NuisanceError> {
        if x.len() != self.input_dim() {
            return Err(NuisanceError::InvalidConfig(format!(
                "expected {} covariates, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NuisanceError::NonFinite("basis input"));
        }
        let mut out = Vec::with_capacity(self.output_dim());
        self.expand_into(x, &mut out);
        Ok(out)
    }

    /// Append the expansion of `x` to `out`. Inputs are assumed validated.
    pub(crate) fn expand_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.push(1.0);
        match self {
            BasisExpansion::Raw { .. } => out.extend_from_slice(x),
            BasisExpansion::Polynomial2 { .. } => {
                out.extend_from_slice(x);
                for i in 0..x.len() {
                    for j in i..x.len() {
                        out.push(x[i] * x[j]);
                    }
                }
            }
            BasisExpansion::Rbf { centers, scale, .. } => {
                let denom = 2.0 * scale * scale;
                out.extend(centers.iter().map(|c| (-sq_dist(x, c) / denom).exp()));
            }
        }
    }
}

/// Lloyd's algorithm on a seeded subsample. Bandwidth is the median
/// distance between distinct centres (1 if fewer than two).
fn kmeans_centers(rows: &[&[f64]], k: usize, seed: u64) -> (Vec<Vec<f64>>, f64) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut stream_rng(seed, 0xCE17));
    order.truncate(KMEANS_SUBSAMPLE);
    let sample: Vec<&[f64]> = order.iter().map(|&i| rows[i]).collect();

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    for row in &sample {
        if centers.len() == k {
            break;
        }
        if !centers.iter().any(|c| sq_dist(c, row) == 0.0) {
            centers.push(row.to_vec());
        }
    }
    let d = sample[0].len();
    for _ in 0..KMEANS_ITERATIONS {
        let mut sums = vec![vec![0.0; d]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for row in &sample {
            let nearest = (0..centers.len())
                .min_by(|&a, &b| sq_dist(row, &centers[a]).total_cmp(&sq_dist(row, &centers[b])))
                .unwrap_or(0);
            counts[nearest] += 1;
            for (s, v) in sums[nearest].iter_mut().zip(row.iter()) {
                *s += v;
            }
        }
        for ((c, s), &m) in centers.iter_mut().zip(&sums).zip(&counts) {
            if m > 0 {
                for (cv, sv) in c.iter_mut().zip(s) {
                    *cv = sv / m as f64;
                }
            }
        }
    }

    let mut dists = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            dists.push(sq_dist(&centers[i], &centers[j]).sqrt());
        }
    }
    let scale = if dists.is_empty() {
        1.0
    } else {
        let m = crate::stats::quantile(&dists, 0.5);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    (centers, scale)
}
