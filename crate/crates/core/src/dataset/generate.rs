//! Synthetic benchmark generators with known potential outcomes.
//!
//! # IHDP-like surface
//!
//! Covariates are i.i.d. standard normal. A seed-dependent coefficient draw
//! picks an active set `A` of up to five covariates; `a`, `b` are its first
//! two members. With `lin(x) = sum_{j in A} b_j x_j`:
//!
//! ```text
//! mu0(x) = 1 + lin(x) + c * x_a * x_b + s0 * exp(x_a)
//! mu1(x) = 1 + lin(x) + c * x_a * x_b + s1 * exp(x_a) + tau0
//! logit P(t = 1 | x) = alpha0 + x_a + w_b * x_b
//! ```
//!
//! with `b_j ~ ±U(0.5, 1.5)`, `c ~ ±U(0.25, 0.75)`, `s0 ~ U(0.25, 0.75)`,
//! `s1 = s0 + U(0.75, 1.25)`, `tau0 ~ U(3, 5)`, `w_b = ±0.5`. The effect is
//! heterogeneous and nonlinear in the main confounder `x_a`. `alpha0` is
//! calibrated by bisection on a fixed reference sample so that the mean
//! clipped propensity equals the configured treated fraction; it therefore
//! depends on `(seed, d, config)` but not on `n`. Observed outcomes are the
//! assigned arm's mean plus Gaussian noise of scale `noise_scale`.
//!
//! # OP-like surface
//!
//! Eleven customer covariates derived from two latent factors (engagement and
//! wealth). The treatment is a 20% discount; revenue is price times a softplus
//! demand index, and the discount multiplies demand by `1 + u(x)` where
//! the uplift offset is calibrated so that a configured fraction of units has
//! `mu1 > mu0`. Noise is multiplicative log-normal with unit mean, which
//! keeps revenue nonnegative while `E[y | x, t] = mu_t(x)` holds exactly.

use super::{DatasetError, GroundTruth, ObservationalDataset};
use crate::rng::stream_rng;
use crate::stats::quantile;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const COEF_STREAM: u64 = 0;
const COVARIATE_STREAM: u64 = 1;
const TREATMENT_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
/// Reference sample used to calibrate intercepts; fixed across seeds.
const REFERENCE_SEED: u64 = 0x0C0F_FEE0;
const REFERENCE_SIZE: usize = 20_000;

/// Generator knobs for [`generate_ihdp_like`] and [`generate_linear`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    /// Standard deviation of the additive outcome noise.
    pub noise_scale: f64,
    /// Target share of treated units (139 / 747 for IHDP-like data).
    pub treated_fraction_target: f64,
    /// True propensities are clipped to `[clip, 1 - clip]`.
    pub propensity_clip: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            noise_scale: 1.0,
            treated_fraction_target: 139.0 / 747.0,
            propensity_clip: 0.01,
        }
    }
}

/// Generator knobs for [`generate_op_like_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpConfig {
    /// Log-scale standard deviation of the multiplicative revenue noise.
    pub noise_scale: f64,
    pub treated_fraction_target: f64,
    /// Share of the population for which the discount raises expected revenue.
    pub positive_effect_fraction: f64,
    pub propensity_clip: f64,
}

impl Default for OpConfig {
    fn default() -> Self {
        Self {
            noise_scale: 0.3,
            treated_fraction_target: 0.5,
            positive_effect_fraction: 0.8,
            propensity_clip: 0.01,
        }
    }
}

/// Column names of the OP-like covariates.
pub const OP_COVARIATES: [&str; 11] = [
    "account_age",
    "age",
    "avg_hours",
    "days_visited",
    "friends_count",
    "has_membership",
    "is_us",
    "songs_purchased",
    "income",
    "sessions_last_week",
    "prior_discount_uses",
];

const FULL_PRICE: f64 = 10.0;
const DISCOUNT_PRICE: f64 = 8.0;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_common(n: usize, noise: f64, target: f64, clip: f64) -> Result<(), DatasetError> {
    if n < 20 {
        return Err(DatasetError::Invalid(format!("need n >= 20, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DatasetError::DegenerateConfig(format!(
            "noise_scale must be finite and >= 0, got {noise}"
        )));
    }
    if !(clip > 0.0 && clip < 0.5) {
        return Err(DatasetError::DegenerateConfig(format!(
            "propensity_clip must lie in (0, 0.5), got {clip}"
        )));
    }
    if !(target > clip && target < 1.0 - clip) {
        return Err(DatasetError::DegenerateConfig(format!(
            "treated_fraction_target {target} forces an all-treated or all-control assignment"
        )));
    }
    Ok(())
}

fn clipped_propensity(logit: f64, clip: f64) -> f64 {
    sigmoid(logit).clamp(clip, 1.0 - clip)
}

/// Intercept `alpha` such that `mean(clip(sigmoid(alpha + index_i))) = target`.
fn calibrate_intercept(index: &[f64], target: f64, clip: f64) -> f64 {
    let mean_p = |alpha: f64| {
        index
            .iter()
            .map(|&z| clipped_propensity(alpha + z, clip))
            .sum::<f64>()
            / index.len() as f64
    };
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn assign_and_observe(
    seed: u64,
    propensity: &[f64],
    mu0: &[f64],
    mu1: &[f64],
    noise: impl Fn(&mut ChaCha8Rng, f64) -> f64,
) -> Result<(Vec<bool>, Vec<f64>), DatasetError> {
    let mut t_rng = stream_rng(seed, TREATMENT_STREAM);
    let treatments: Vec<bool> = propensity
        .iter()
        .map(|&p| t_rng.random::<f64>() < p)
        .collect();
    let n_treated = treatments.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == treatments.len() {
        return Err(DatasetError::DegenerateConfig(
            "generated sample contains a single treatment arm".into(),
        ));
    }
    let mut y_rng = stream_rng(seed, NOISE_STREAM);
    let outcomes = treatments
        .iter()
        .enumerate()
        .map(|(i, &t)| noise(&mut y_rng, if t { mu1[i] } else { mu0[i] }))
        .collect();
    Ok((treatments, outcomes))
}

struct IhdpSurface {
    active: Vec<(usize, f64)>,
    a: usize,
    b: usize,
    interaction: f64,
    s0: f64,
    s1: f64,
    tau0: f64,
    w_b: f64,
    linear_effect: Vec<(usize, f64)>,
}

impl IhdpSurface {
    fn draw(d: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, COEF_STREAM);
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let active: Vec<(usize, f64)> = perm[..d.min(5)]
            .iter()
            .map(|&j| {
                let s = sign(&mut rng);
                (j, s * rng.random_range(0.5..1.5))
            })
            .collect();
        let interaction = sign(&mut rng) * rng.random_range(0.25..0.75);
        let s0 = rng.random_range(0.25..0.75);
        let s1 = s0 + rng.random_range(0.75..1.25);
        let tau0 = rng.random_range(3.0..5.0);
        let w_b = 0.5 * sign(&mut rng);
        let linear_effect = perm[..d.min(3)]
            .iter()
            .map(|&j| {
                let s = sign(&mut rng);
                (j, s * rng.random_range(0.25..0.75))
            })
            .collect();
        Self {
            active,
            a: perm[0],
            b: perm[1],
            interaction,
            s0,
            s1,
            tau0,
            w_b,
            linear_effect,
        }
    }

    fn linear_part(&self, x: &[f64]) -> f64 {
        1.0 + self.active.iter().map(|&(j, b)| b * x[j]).sum::<f64>()
    }

    fn nonlinear(&self, x: &[f64]) -> (f64, f64) {
        let common = self.linear_part(x) + self.interaction * x[self.a] * x[self.b];
        let bump = x[self.a].exp();
        (common + self.s0 * bump, common + self.s1 * bump + self.tau0)
    }

    fn linear(&self, x: &[f64]) -> (f64, f64) {
        let base = self.linear_part(x);
        let effect = self.tau0
            + self
                .linear_effect
                .iter()
                .map(|&(j, e)| e * x[j])
                .sum::<f64>();
        (base, base + effect)
    }

    fn logit_index(&self, x_a: f64, x_b: f64) -> f64 {
        x_a + self.w_b * x_b
    }

    fn intercept(&self, target: f64, clip: f64) -> f64 {
        let mut rng = stream_rng(REFERENCE_SEED, 0);
        let index: Vec<f64> = (0..REFERENCE_SIZE)
            .map(|_| {
                let (xa, xb) = (normal(&mut rng), normal(&mut rng));
                self.logit_index(xa, xb)
            })
            .collect();
        calibrate_intercept(&index, target, clip)
    }
}

fn generate_gaussian(
    n: usize,
    d: usize,
    seed: u64,
    config: &DgpConfig,
    linear: bool,
) -> Result<ObservationalDataset, DatasetError> {
    check_common(
        n,
        config.noise_scale,
        config.treated_fraction_target,
        config.propensity_clip,
    )?;
    if d < 2 {
        return Err(DatasetError::Invalid(format!("need d >= 2, got {d}")));
    }
    let surface = IhdpSurface::draw(d, seed);
    let alpha = surface.intercept(config.treated_fraction_target, config.propensity_clip);

    let mut x_rng = stream_rng(seed, COVARIATE_STREAM);
    let covariates: Vec<f64> = (0..n * d).map(|_| normal(&mut x_rng)).collect();
    let mut mu0 = Vec::with_capacity(n);
    let mut mu1 = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    for x in covariates.chunks_exact(d) {
        let (m0, m1) = if linear {
            surface.linear(x)
        } else {
            surface.nonlinear(x)
        };
        mu0.push(m0);
        mu1.push(m1);
        propensity.push(clipped_propensity(
            alpha + surface.logit_index(x[surface.a], x[surface.b]),
            config.propensity_clip,
        ));
    }
    let noise = config.noise_scale;
    let (treatments, outcomes) = assign_and_observe(seed, &propensity, &mu0, &mu1, |rng, m| {
        if noise == 0.0 {
            m
        } else {
            m + noise * normal(rng)
        }
    })?;
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    ObservationalDataset::new(
        names,
        covariates,
        treatments,
        outcomes,
        Some(GroundTruth {
            mu0,
            mu1,
            true_propensity: Some(propensity),
        }),
    )
}

/// IHDP-shaped data: confounded, imbalanced treatment with nonlinear,
/// heterogeneous potential outcomes. Requires `n >= 20`, `d >= 2`.
pub fn generate_ihdp_like(
    n: usize,
    d: usize,
    seed: u64,
    config: &DgpConfig,
) -> Result<ObservationalDataset, DatasetError> {
    generate_gaussian(n, d, seed, config, false)
}

/// Same covariates and assignment mechanism as [`generate_ihdp_like`], but
/// both potential outcomes are linear in `x`.
pub fn generate_linear(
    n: usize,
    d: usize,
    seed: u64,
    config: &DgpConfig,
) -> Result<ObservationalDataset, DatasetError> {
    generate_gaussian(n, d, seed, config, true)
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// One customer row in [`OP_COVARIATES`] order.
fn op_customer(rng: &mut ChaCha8Rng) -> [f64; 11] {
    let engagement = normal(rng);
    let wealth = normal(rng);
    let mut e = || normal(rng);
    let account_age = (3.0 + 1.2 * engagement + 0.7 * e()).round().clamp(1.0, 5.0);
    let age = (38.0 + 10.0 * e()).round().clamp(18.0, 75.0);
    let avg_hours = (0.8 + 0.4 * engagement + 0.3 * e()).exp();
    let days_visited = (3.5 + 1.5 * engagement + e()).round().clamp(0.0, 7.0);
    let friends_count = (1.5 + 0.5 * engagement + 0.5 * e()).exp().floor();
    let songs_purchased = (1.5 + 0.4 * engagement + 0.4 * wealth + 0.3 * e()).exp();
    let income = (0.5 * wealth + 0.2 * e()).exp();
    let sessions = (5.0 + 2.0 * engagement + 1.5 * e())
        .round()
        .clamp(0.0, 30.0);
    let prior_uses = (0.5 - 0.3 * wealth + 0.5 * e()).exp().floor();
    let has_membership = bernoulli(rng, sigmoid(0.8 * engagement + 0.5 * wealth));
    let is_us = bernoulli(rng, 0.6);
    [
        account_age,
        age,
        avg_hours,
        days_visited,
        friends_count,
        has_membership,
        is_us,
        songs_purchased,
        income,
        sessions,
        prior_uses,
    ]
}

/// Expected units bought at full price.
fn op_demand(x: &[f64]) -> f64 {
    let hours = (x[2].ln() - 0.8) / 0.5;
    let songs = (x[7].ln() - 1.5) / 0.65;
    let days = (x[3] - 3.5) / 1.9;
    3.0 * softplus(0.5 + 0.6 * hours + 0.5 * songs + 0.3 * x[5] + 0.1 * days + 0.2 * x[6])
}

/// Uplift index before the calibrated offset.
fn op_uplift_index(x: &[f64]) -> f64 {
    let income = x[8].ln() / 0.54;
    let days = (x[3] - 3.5) / 1.9;
    let age = (x[1] - 38.0) / 10.0;
    -0.35 * income + 0.25 * days - 0.15 * age + 0.1 * x[10].min(3.0)
}

fn op_logit_index(x: &[f64]) -> f64 {
    let income = x[8].ln() / 0.54;
    let hours = (x[2].ln() - 0.8) / 0.5;
    -0.5 * income + 0.3 * hours
}

/// OP-shaped data with the default [`OpConfig`].
pub fn generate_op_like(n: usize, seed: u64) -> Result<ObservationalDataset, DatasetError> {
    generate_op_like_with(n, seed, &OpConfig::default())
}

/// Online-promotion-shaped data: 11 customer covariates, a discount flag as
/// treatment and nonnegative revenue as outcome.
pub fn generate_op_like_with(
    n: usize,
    seed: u64,
    config: &OpConfig,
) -> Result<ObservationalDataset, DatasetError> {
    check_common(
        n,
        config.noise_scale,
        config.treated_fraction_target,
        config.propensity_clip,
    )?;
    let f = config.positive_effect_fraction;
    if !(0.0..=1.0).contains(&f) {
        return Err(DatasetError::DegenerateConfig(format!(
            "positive_effect_fraction must lie in [0, 1], got {f}"
        )));
    }

    let mut ref_rng = stream_rng(REFERENCE_SEED, 1);
    let reference: Vec<[f64; 11]> = (0..REFERENCE_SIZE)
        .map(|_| op_customer(&mut ref_rng))
        .collect();
    let uplift_ref: Vec<f64> = reference.iter().map(|x| op_uplift_index(x)).collect();
    // mu1 > mu0  <=>  0.8 * (1 + u) > 1  <=>  u > 0.25
    let threshold = 1.0 - DISCOUNT_PRICE / FULL_PRICE;
    let threshold = threshold / (1.0 - threshold);
    let offset = threshold - quantile(&uplift_ref, 1.0 - f);
    let logit_ref: Vec<f64> = reference.iter().map(|x| op_logit_index(x)).collect();
    let alpha = calibrate_intercept(
        &logit_ref,
        config.treated_fraction_target,
        config.propensity_clip,
    );

    let mut x_rng = stream_rng(seed, COVARIATE_STREAM);
    let rows: Vec<[f64; 11]> = (0..n).map(|_| op_customer(&mut x_rng)).collect();
    let mut mu0 = Vec::with_capacity(n);
    let mut mu1 = Vec::with_capacity(n);
    let mut propensity = Vec::with_capacity(n);
    for x in &rows {
        let demand = op_demand(x);
        let lift = (1.0 + offset + op_uplift_index(x)).max(0.0);
        mu0.push(FULL_PRICE * demand);
        mu1.push(DISCOUNT_PRICE * demand * lift);
        propensity.push(clipped_propensity(
            alpha + op_logit_index(x),
            config.propensity_clip,
        ));
    }
    let sigma = config.noise_scale;
    let (treatments, outcomes) = assign_and_observe(seed, &propensity, &mu0, &mu1, |rng, m| {
        if sigma == 0.0 {
            m
        } else {
            m * (sigma * normal(rng) - 0.5 * sigma * sigma).exp()
        }
    })?;
    ObservationalDataset::new(
        OP_COVARIATES.iter().map(|s| s.to_string()).collect(),
        rows.iter().flatten().copied().collect(),
        treatments,
        outcomes,
        Some(GroundTruth {
            mu0,
            mu1,
            true_propensity: Some(propensity),
        }),
    )
}
