use super::basis::{BasisExpansion, BasisKind};
use super::logistic::{newton_solve, sigmoid, LogisticObjective, SolverConfig};
use super::NuisanceError;
use crate::dataset::ObservationalDataset;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensityConfig {
    pub basis: BasisKind,
    pub solver: SolverConfig,
    /// Predictions are clipped to `[clip, 1 - clip]`.
    pub clip: f64,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        Self {
            basis: BasisKind::Polynomial2,
            solver: SolverConfig::default(),
            clip: 0.01,
        }
    }
}

/// `p(x) = clip(sigmoid(sum_j beta_j g_j(z(x))))` where `z` standardises the
/// covariates with training moments (identity when disabled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub beta: Vec<f64>,
    pub basis: BasisExpansion,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub clip: f64,
    /// Newton iterations used by the fit (0 for hand-built models).
    pub iterations: usize,
}

fn check_clip(clip: f64) -> Result<(), NuisanceError> {
    if clip > 0.0 && clip < 0.5 {
        Ok(())
    } else {
        Err(NuisanceError::InvalidConfig(format!(
            "propensity clip must lie in (0, 0.5), got {clip}"
        )))
    }
}

impl PropensityModel {
    /// A model with given coefficients and no standardisation.
    pub fn new(beta: Vec<f64>, basis: BasisExpansion, clip: f64) -> Result<Self, NuisanceError> {
        check_clip(clip)?;
        if beta.len() != basis.output_dim() {
            return Err(NuisanceError::InvalidConfig(format!(
                "{} coefficients for {} basis features",
                beta.len(),
                basis.output_dim()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(NuisanceError::NonFinite("propensity coefficients"));
        }
        let d = basis.input_dim();
        Ok(Self {
            beta,
            basis,
            center: vec![0.0; d],
            scale: vec![1.0; d],
            clip,
            iterations: 0,
        })
    }

    fn standardize(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(self.center.iter().zip(&self.scale))
                .map(|(v, (c, s))| (v - c) / s),
        );
    }

    /// Linear predictor `beta . g(x)`.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(x.len());
        self.standardize(x, &mut z);
        let mut features = Vec::with_capacity(self.beta.len());
        self.basis.expand_into(&z, &mut features);
        features.iter().zip(&self.beta).map(|(g, b)| g * b).sum()
    }

    /// Clipped propensity for one covariate vector.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let p = sigmoid(self.logit(x));
        if p.is_nan() {
            // inf - inf in the logit; treat as uninformative
            return 0.5;
        }
        p.clamp(self.clip, 1.0 - self.clip)
    }

    pub fn predict_all(&self, data: &ObservationalDataset) -> Vec<f64> {
        data.rows().map(|x| self.predict(x)).collect()
    }
}

fn moments(data: &ObservationalDataset, standardize: bool) -> (Vec<f64>, Vec<f64>) {
    let d = data.d();
    if !standardize {
        return (vec![0.0; d], vec![1.0; d]);
    }
    let n = data.n() as f64;
    let mut center = vec![0.0; d];
    for x in data.rows() {
        for (c, v) in center.iter_mut().zip(x) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= n);
    let mut scale = vec![0.0; d];
    for x in data.rows() {
        for ((s, v), c) in scale.iter_mut().zip(x).zip(&center) {
            *s += (v - c) * (v - c);
        }
    }
    for s in scale.iter_mut() {
        let sd = (*s / n).sqrt();
        *s = if sd > 1e-12 { sd } else { 1.0 };
    }
    (center, scale)
}

/// Fit the propensity model by penalised maximum likelihood.
pub fn fit_propensity(
    data: &ObservationalDataset,
    config: &PropensityConfig,
) -> Result<PropensityModel, NuisanceError> {
    check_clip(config.clip)?;
    let solver = &config.solver;
    if !(solver.lambda >= 0.0 && solver.tolerance > 0.0) {
        return Err(NuisanceError::InvalidConfig(
            "solver needs lambda >= 0 and tolerance > 0".into(),
        ));
    }
    let n_treated = data.n_treated();
    if n_treated == 0 || n_treated == data.n() {
        return Err(NuisanceError::SingleClass);
    }
    let (center, scale) = moments(data, solver.standardize);
    let mut model = PropensityModel {
        beta: Vec::new(),
        basis: BasisExpansion::Raw {
            input_dim: data.d(),
        },
        center,
        scale,
        clip: config.clip,
        iterations: 0,
    };

    let mut standardized = Vec::with_capacity(data.n() * data.d());
    let mut z = Vec::with_capacity(data.d());
    for x in data.rows() {
        model.standardize(x, &mut z);
        standardized.extend_from_slice(&z);
    }
    let z_rows: Vec<&[f64]> = standardized.chunks_exact(data.d()).collect();
    model.basis = BasisExpansion::fit(config.basis, &z_rows)?;

    let s = model.basis.output_dim();
    let mut design = Vec::with_capacity(data.n() * s);
    for z in &z_rows {
        model.basis.expand_into(z, &mut design);
    }
    let targets = data
        .treatments()
        .iter()
        .map(|&t| if t { 1.0 } else { 0.0 })
        .collect();
    let objective = LogisticObjective::new(design, targets, s, solver.lambda);
    let fit = newton_solve(&objective, solver)?;
    model.beta = fit.beta;
    model.iterations = fit.iterations;
    Ok(model)
}

/// The training objective a fit minimised; exposed for gradient checks.
pub fn propensity_objective(
    data: &ObservationalDataset,
    model: &PropensityModel,
    lambda: f64,
) -> LogisticObjective {
    let s = model.basis.output_dim();
    let mut design = Vec::with_capacity(data.n() * s);
    let mut z = Vec::with_capacity(data.d());
    for x in data.rows() {
        model.standardize(x, &mut z);
        model.basis.expand_into(&z, &mut design);
    }
    let targets = data
        .treatments()
        .iter()
        .map(|&t| if t { 1.0 } else { 0.0 })
        .collect();
    LogisticObjective::new(design, targets, s, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn raw(d: usize) -> BasisExpansion {
        BasisExpansion::Raw { input_dim: d }
    }

    #[test]
    fn zero_beta_predicts_one_half() {
        let m = PropensityModel::new(vec![0.0; 3], raw(2), 0.01).unwrap();
        assert_eq!(m.predict(&[5.0, -3.0]), 0.5);
    }

    #[test]
    fn logit_ln3_gives_three_quarters() {
        let m = PropensityModel::new(vec![3f64.ln(), 0.0], raw(1), 0.01).unwrap();
        assert!((m.predict(&[42.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn huge_logits_are_clipped() {
        let m = PropensityModel::new(vec![0.0, 1.0], raw(1), 0.01).unwrap();
        assert_eq!(m.predict(&[1e300]), 0.99);
        assert_eq!(m.predict(&[-1e300]), 0.01);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(PropensityModel::new(vec![0.0; 2], raw(2), 0.01).is_err());
        assert!(PropensityModel::new(vec![0.0; 3], raw(2), 0.5).is_err());
        assert!(PropensityModel::new(vec![f64::NAN, 0.0, 0.0], raw(2), 0.1).is_err());
    }

    #[test]
    fn single_class_is_an_error() {
        let data = ObservationalDataset::from_rows(
            &[vec![1.0], vec![2.0]],
            vec![true, true],
            vec![0.0, 0.0],
            None,
        )
        .unwrap();
        assert!(matches!(
            fit_propensity(&data, &PropensityConfig::default()),
            Err(NuisanceError::SingleClass)
        ));
    }

    #[test]
    fn separable_data_gives_finite_clipped_fit() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let t: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let data = ObservationalDataset::from_rows(&rows, t, vec![0.0; 40], None).unwrap();
        let cfg = PropensityConfig {
            basis: BasisKind::Raw,
            ..PropensityConfig::default()
        };
        let m = fit_propensity(&data, &cfg).unwrap();
        assert!(m.beta.iter().all(|b| b.is_finite()));
        for p in m.predict_all(&data) {
            assert!((0.01..=0.99).contains(&p));
        }
        assert!(m.predict(&[0.0]) < 0.05 && m.predict(&[39.0]) > 0.95);
    }

    #[test]
    fn independent_assignment_predicts_one_half() {
        let mut rng = stream_rng(17, 0);
        let n = 10000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let data = ObservationalDataset::from_rows(&rows, t, vec![0.0; n], None).unwrap();
        let m = fit_propensity(&data, &PropensityConfig::default()).unwrap();
        for p in m.predict_all(&data) {
            assert!((p - 0.5).abs() <= 0.05, "prediction {p}");
        }
    }

    #[test]
    fn converged_gradient_is_below_tolerance() {
        let mut rng = stream_rng(2, 0);
        let n = 500;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample(StandardNormal)]).collect();
        let t: Vec<bool> = rows
            .iter()
            .map(|r| rng.random::<f64>() < sigmoid(0.3 + r[0]))
            .collect();
        let data = ObservationalDataset::from_rows(&rows, t, vec![0.0; n], None).unwrap();
        let cfg = PropensityConfig::default();
        let m = fit_propensity(&data, &cfg).unwrap();
        let obj = propensity_objective(&data, &m, cfg.solver.lambda);
        let g = obj.gradient(&m.beta);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= cfg.solver.tolerance);
    }
}
