use std::sync::atomic::{AtomicUsize, Ordering};
use stochint::dataset::{
    generate_ihdp_like, generate_linear, split_folds, DgpConfig, ObservationalDataset,
};
use stochint::gesio::{self, GaConfig};
use stochint::nuisance::{
    FittedNuisance, NuisanceConfig, NuisanceError, NuisanceLearner, OracleNuisance, OutcomeConfig,
    OutcomeKind,
};
use stochint::sie::{
    cross_fit, estimate_ate_difference, estimate_sie, expected_response, horvitz_thompson,
    StochasticDegree,
};

fn deg(v: f64) -> StochasticDegree {
    StochasticDegree::new(v).unwrap()
}

fn ridge() -> NuisanceConfig {
    NuisanceConfig {
        outcome: OutcomeConfig {
            kind: OutcomeKind::RidgeLinear,
            ..OutcomeConfig::default()
        },
        ..NuisanceConfig::default()
    }
}

#[test]
fn noiseless_linear_ate_is_recovered() {
    let cfg = DgpConfig {
        noise_scale: 0.0,
        ..DgpConfig::default()
    };
    let data = generate_linear(5000, 5, 4, &cfg).unwrap();
    let est = estimate_ate_difference(&data, 5, 0, &ridge()).unwrap();
    let truth = data.true_ate().unwrap();
    assert!((est - truth).abs() < 0.05, "{est} vs {truth}");
}

#[test]
fn held_out_outcomes_do_not_leak_into_their_predictions() {
    let data = generate_ihdp_like(400, 4, 6, &DgpConfig::default()).unwrap();
    let (k, seed) = (4, 12);
    let before = cross_fit(&data, k, seed, &NuisanceConfig::default()).unwrap();
    let fold0 = split_folds(data.n(), k, seed).unwrap().held_out(0);
    let mut y = data.outcomes().to_vec();
    for &i in &fold0 {
        y[i] = 1e3 * (i as f64 + 1.0);
    }
    let poisoned = data.clone().with_outcomes(y).unwrap();
    let after = cross_fit(&poisoned, k, seed, &NuisanceConfig::default()).unwrap();
    for &i in &fold0 {
        let (a, b) = (&before.records[i], &after.records[i]);
        assert_eq!((a.p_hat, a.mu0, a.mu1), (b.p_hat, b.mu0, b.mu1));
    }
    let changed = (0..data.n())
        .filter(|i| !fold0.contains(i))
        .any(|i| before.records[i].mu1 != after.records[i].mu1);
    assert!(changed, "other folds train on the poisoned units");
}

#[test]
fn estimates_are_deterministic() {
    let data = generate_ihdp_like(300, 5, 1, &DgpConfig::default()).unwrap();
    let a = estimate_sie(&data, deg(2.0), 5, 7, &NuisanceConfig::default()).unwrap();
    let b = estimate_sie(&data, deg(2.0), 5, 7, &NuisanceConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    let c = estimate_sie(&data, deg(2.0), 5, 8, &NuisanceConfig::default()).unwrap();
    assert_ne!(a.psi_hat, c.psi_hat);
}

#[test]
fn observed_policy_matches_propensity_weighted_average_under_oracle() {
    let cfg = DgpConfig {
        noise_scale: 0.0,
        ..DgpConfig::default()
    };
    let data = generate_ihdp_like(500, 3, 2, &cfg).unwrap();
    let rep = estimate_sie(
        &data,
        StochasticDegree::OBSERVED,
        5,
        0,
        &OracleNuisance::exact(),
    )
    .unwrap();
    assert!((rep.psi_hat - rep.tau_ate_plugin).abs() < 1e-12);
}

#[test]
fn expected_response_grows_with_a_uniform_shift_when_effects_are_positive() {
    let cfg = DgpConfig {
        noise_scale: 0.0,
        ..DgpConfig::default()
    };
    let data = generate_ihdp_like(400, 3, 9, &cfg).unwrap();
    let t = data.truth().unwrap();
    assert!(t.mu1.iter().zip(&t.mu0).all(|(a, b)| a > b));
    let values: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&d| {
            expected_response(&data, &vec![d; data.n()], 5, 0, &OracleNuisance::exact()).unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
}

#[test]
fn ipw_with_true_propensity_is_consistent() {
    let data = generate_linear(20_000, 4, 3, &DgpConfig::default()).unwrap();
    let t = data.truth().unwrap();
    let p = t.true_propensity.as_ref().unwrap();
    let est = horvitz_thompson(data.treatments(), data.outcomes(), p, 0.0).unwrap();
    let terms: Vec<f64> = (0..data.n())
        .map(|i| {
            let y = data.outcomes()[i];
            if data.treatments()[i] {
                y / p[i]
            } else {
                -y / (1.0 - p[i])
            }
        })
        .collect();
    let se = stochint::stats::std_error(&terms);
    let truth = data.true_ate().unwrap();
    assert!(
        (est - truth).abs() <= 3.0 * se,
        "{est} vs {truth} (se {se})"
    );
}

struct CountingLearner {
    inner: NuisanceConfig,
    fits: AtomicUsize,
}

impl NuisanceLearner for CountingLearner {
    type Fitted = FittedNuisance;

    fn fit(&self, train: &ObservationalDataset) -> Result<FittedNuisance, NuisanceError> {
        self.fits.fetch_add(1, Ordering::SeqCst);
        self.inner.fit(train)
    }
}

#[test]
fn optimization_cross_fits_once() {
    let data = stochint::dataset::generate_op_like(300, 4).unwrap();
    let learner = CountingLearner {
        inner: NuisanceConfig::default(),
        fits: AtomicUsize::new(0),
    };
    let ga = GaConfig {
        generations: 5,
        population_size: 10,
        ..GaConfig::default()
    };
    gesio::optimize(&data, &ga, &learner, 4, 0).unwrap();
    assert_eq!(learner.fits.load(Ordering::SeqCst), 4);
}
