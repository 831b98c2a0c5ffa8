//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! ```text
//! cargo test -p sie-cli --test acceptance            # every criterion
//! cargo test -p sie-cli --test acceptance -- sweep   # names containing "sweep"
//! ```

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sie_cli::config::{BenchmarkConfig, DataSpec, Method, OptimizeConfig, Replicate, SourceKind};
use sie_cli::{benchmark, optimize};
use std::process::ExitCode;
use std::time::{Duration, Instant};
use stochint::dataset::{
    generate_ihdp_like, generate_op_like, DgpConfig, GroundTruth, ObservationalDataset,
};
use stochint::gesio::{self, GaConfig};
use stochint::nuisance::{
    fit_propensity, propensity_objective, BasisKind, BoostingParams, GradientBoostedTrees,
    NuisanceConfig, OracleNuisance, PropensityConfig,
};
use stochint::rng::derive_seed;
use stochint::sie::{cross_fit, estimate_sie, stochastic_propensity, StochasticDegree};

type Check = fn() -> Result<(bool, String)>;

/// Independent reference for the shifted propensity.
fn q_ref(p: f64, delta: f64) -> f64 {
    delta * p / (delta * p + 1.0 - p)
}

fn deg(v: f64) -> StochasticDegree {
    StochasticDegree::new(v).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

fn stochastic_propensity_suite() -> Result<(bool, String)> {
    let ps: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
    let deltas: Vec<f64> = (0..10)
        .map(|j| 0.25 * j as f64 + 0.1 * (j * j) as f64)
        .collect();
    let mut ok = true;
    for &p in &ps {
        ok &= stochastic_propensity(p, StochasticDegree::OBSERVED) == p;
        ok &= stochastic_propensity(p, deg(0.0)) == 0.0;
        let qs: Vec<f64> = deltas
            .iter()
            .map(|&d| stochastic_propensity(p, deg(d)))
            .collect();
        ok &= qs.windows(2).all(|w| w[1] > w[0]);
    }
    let half = stochastic_propensity(0.5, deg(1.5));
    ok &= (half - 0.6).abs() <= 1e-12;
    Ok((
        ok,
        format!(
            "q(0.5,1.5)={half}, {} monotone pairs",
            ps.len() * deltas.len()
        ),
    ))
}

fn influence_oracle() -> Result<(bool, String)> {
    let cfg = DgpConfig {
        noise_scale: 0.0,
        ..DgpConfig::default()
    };
    let data = generate_ihdp_like(2000, 5, 11, &cfg)?;
    let truth = data.truth().unwrap();
    let p = truth.true_propensity.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    for delta in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let rep = estimate_sie(&data, deg(delta), 5, 3, &OracleNuisance::exact())?;
        let brute: Vec<f64> = (0..data.n())
            .map(|i| {
                let q = q_ref(p[i], delta);
                q * truth.mu1[i] + (1.0 - q) * truth.mu0[i]
            })
            .collect();
        worst = worst.max((rep.psi_hat - mean(&brute)).abs());
    }
    Ok((
        worst <= 1e-12,
        format!("max |psi_hat - brute force| = {worst:.2e}"),
    ))
}

fn unbiasedness() -> Result<(bool, String)> {
    const R: usize = 200;
    let delta = 2.0;
    let nuisance = NuisanceConfig::default();
    let runs: Vec<Result<(f64, f64)>> = (0..R)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(0xB1A5, r as u64);
            let data = generate_ihdp_like(2000, 5, seed, &DgpConfig::default())?;
            let psi = estimate_sie(&data, deg(delta), 5, seed, &nuisance)?.psi_hat;
            let t = data.truth().unwrap();
            let p = t.true_propensity.as_ref().unwrap();
            let oracle: Vec<f64> = (0..data.n())
                .map(|i| {
                    let q = q_ref(p[i], delta);
                    q * t.mu1[i] + (1.0 - q) * t.mu0[i]
                })
                .collect();
            Ok((psi, mean(&oracle)))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let psi: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let truth = mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let bias = mean(&psi) - truth;
    let tol = 3.0 * sample_std(&psi) / (R as f64).sqrt();
    Ok((
        bias.abs() <= tol,
        format!("bias {bias:+.4}, tolerance {tol:.4} (truth {truth:.4})"),
    ))
}

fn bench_config(n: usize, d: usize, methods: Vec<Method>, replications: usize) -> BenchmarkConfig {
    let mut cfg = BenchmarkConfig {
        data: DataSpec {
            source: SourceKind::IhdpLike,
            n: Some(n),
            d: Some(d),
            ..DataSpec::default()
        },
        methods,
        replications,
        replicate: Replicate::Dgp,
        ..BenchmarkConfig::default()
    };
    cfg.resolve().unwrap();
    cfg
}

fn ate_ordering() -> Result<(bool, String)> {
    let cfg = bench_config(747, 25, Method::ALL.to_vec(), 50);
    let result = benchmark::compute(&cfg)?;
    let eps = |m| result.find(m, benchmark::Split::Test).unwrap().mean_epsilon;
    let (sie, ols, ipwe) = (eps(Method::Sie), eps(Method::Ols), eps(Method::Ipwe));
    Ok((
        sie < ols && sie < ipwe,
        format!("test mean eps: sie {sie:.3}, ols {ols:.3}, ipwe {ipwe:.3}"),
    ))
}

fn data_size_trend() -> Result<(bool, String)> {
    let mut cfg = bench_config(200, 25, vec![Method::Sie], 30);
    cfg.sizes = vec![200, 2000];
    let result = benchmark::compute(&cfg)?;
    let at = |n| {
        result
            .sizes
            .iter()
            .find(|r| r.n == n && r.split == benchmark::Split::Test)
            .unwrap()
            .mean_epsilon
    };
    let (small, large) = (at(200), at(2000));
    Ok((
        large < small,
        format!("mean eps n=200: {small:.3}, n=2000: {large:.3}"),
    ))
}

fn delta_sweep_shape() -> Result<(bool, String)> {
    let data = generate_op_like(10_000, 0)?;
    let cf = cross_fit(&data, 5, 0, &NuisanceConfig::default())?;
    let psi = |d: f64| cf.report(deg(d)).psi_hat;
    let grid: Vec<f64> = (0..=5).map(|d| psi(d as f64)).collect();
    let monotone = grid.windows(2).all(|w| w[1] >= w[0]);
    let (p0, p8, p10) = (grid[0], psi(8.0), psi(10.0));
    let ratio = (p8 - p10).abs() / (p10 - p0).abs();
    Ok((
        monotone && ratio < 0.05,
        format!(
            "psi(0..5) = {:?}, |psi(8)-psi(10)| / |psi(10)-psi(0)| = {ratio:.4}",
            grid.iter()
                .map(|v| (v * 1e3).round() / 1e3)
                .collect::<Vec<_>>()
        ),
    ))
}

/// Noiseless units with `mu1 > mu0` everywhere.
fn monotone_dataset(n: usize, seed: u64) -> ObservationalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mu0: Vec<f64> = rows.iter().map(|x| 2.0 + x[0]).collect();
    let mu1: Vec<f64> = rows
        .iter()
        .zip(&mu0)
        .map(|(x, m)| m + 0.5 + x[1] * x[1])
        .collect();
    let p: Vec<f64> = rows.iter().map(|x| 0.5 + 0.35 * x[0]).collect();
    let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let y: Vec<f64> = (0..n).map(|i| if t[i] { mu1[i] } else { mu0[i] }).collect();
    let truth = GroundTruth {
        mu0,
        mu1,
        true_propensity: Some(p),
    };
    ObservationalDataset::from_rows(&rows, t, y, Some(truth)).unwrap()
}

fn gesio_correctness() -> Result<(bool, String)> {
    let data = monotone_dataset(20, 5);
    let ga = GaConfig::default();
    ensure!(ga.population_size == 50 && ga.generations == 100);
    ensure!(ga.bounds.lo == 0.0 && ga.bounds.hi == 10.0);
    let opt = gesio::optimize(&data, &ga, &OracleNuisance::exact(), 5, 0)?;
    let mean_delta = opt.result.best.mean();

    let trace = &opt.result.trace;
    let mut best = vec![trace.initial_best];
    best.extend(trace.rows.iter().map(|r| r.best_fitness));
    let elitist = best.windows(2).all(|w| w[1] >= w[0]);

    let wins: Vec<Result<bool>> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = OptimizeConfig::default();
            cfg.data.n = Some(1000);
            cfg.data.seed = i;
            cfg.seed = i;
            cfg.ga.seed = i;
            cfg.resolve()?;
            let data = cfg.data.load()?;
            let (_, report) = optimize::compute(&cfg, &data)?;
            Ok(report.expected_response.optimized > report.expected_response.random)
        })
        .collect();
    let wins = wins.into_iter().collect::<Result<Vec<_>>>()?;
    let won = wins.iter().filter(|w| **w).count();
    Ok((
        mean_delta >= 9.0 && elitist && won >= 18,
        format!(
            "monotone mean delta {mean_delta:.3}, best fitness non-decreasing: {elitist}, GA beats random {won}/20"
        ),
    ))
}

fn nuisance_checks() -> Result<(bool, String)> {
    let data = generate_ihdp_like(500, 5, 21, &DgpConfig::default())?;
    let cfg = PropensityConfig {
        basis: BasisKind::Polynomial2,
        ..PropensityConfig::default()
    };
    let model = fit_propensity(&data, &cfg)?;
    let objective = propensity_objective(&data, &model, cfg.solver.lambda);
    // away from the optimum so the gradient is not ~0
    let beta: Vec<f64> = model
        .beta
        .iter()
        .enumerate()
        .map(|(j, b)| b + 0.2 * ((j % 5) as f64 - 2.0))
        .collect();
    let grad = objective.gradient(&beta);
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    for j in [0, 1, 3, 7, beta.len() - 1] {
        let mut plus = beta.clone();
        let mut minus = beta.clone();
        plus[j] += h;
        minus[j] -= h;
        let fd = (objective.value(&plus) - objective.value(&minus)) / (2.0 * h);
        worst_rel = worst_rel.max((grad[j] - fd).abs() / grad[j].abs().max(1e-8));
    }

    let truth = data.truth().unwrap();
    let rows: Vec<&[f64]> = data.rows().collect();
    let gbt = GradientBoostedTrees::fit(&rows, &truth.mu1, &BoostingParams::default());
    let rmse: Vec<f64> = gbt.train_mse.iter().map(|m| m.sqrt()).collect();
    let boosting_monotone = rmse.windows(2).all(|w| w[1] <= w[0]);

    let wide = generate_ihdp_like(747, 25, 22, &DgpConfig::default())?;
    let fresh = generate_ihdp_like(2000, 25, 23, &DgpConfig::default())?;
    let wide_model = fit_propensity(&wide, &cfg)?;
    let clip = cfg.clip;
    let in_bounds = [&wide, &fresh].iter().all(|d| {
        wide_model
            .predict_all(d)
            .iter()
            .all(|&p| p >= clip && p <= 1.0 - clip)
    });
    Ok((
        worst_rel <= 1e-4 && boosting_monotone && in_bounds,
        format!(
            "gradient rel err {worst_rel:.2e}, boosting RMSE monotone over {} rounds: {boosting_monotone}, predictions in [{clip}, {}]: {in_bounds}",
            gbt.trees.len(),
            1.0 - clip
        ),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let mut cfg = bench_config(300, 5, Method::ALL.to_vec(), 3);
    cfg.sizes = vec![200];
    let dir = tempfile::tempdir()?;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    benchmark::run(&cfg, &a)?;
    benchmark::run(&cfg, &b)?;
    let mut names: Vec<String> = std::fs::read_dir(a.join("tables"))?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    ensure!(!names.is_empty(), "no tables written");
    let mut identical = true;
    for name in &names {
        identical &= std::fs::read(a.join("tables").join(name))?
            == std::fs::read(b.join("tables").join(name))?;
    }
    Ok((
        identical,
        format!("{} tables compared: {}", names.len(), names.join(", ")),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 9] = [
        (
            "stochastic_propensity_suite",
            Duration::from_secs(1),
            stochastic_propensity_suite,
        ),
        ("influence_oracle", Duration::from_secs(5), influence_oracle),
        (
            "unbiasedness_monte_carlo",
            Duration::from_secs(300),
            unbiasedness,
        ),
        ("ate_error_ordering", Duration::from_secs(600), ate_ordering),
        ("data_size_trend", Duration::from_secs(600), data_size_trend),
        (
            "delta_sweep_shape",
            Duration::from_secs(120),
            delta_sweep_shape,
        ),
        (
            "gesio_correctness",
            Duration::from_secs(300),
            gesio_correctness,
        ),
        ("nuisance_checks", Duration::from_secs(60), nuisance_checks),
        ("benchmark_determinism", Duration::MAX, determinism),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, limit, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) if elapsed <= limit => (pass, detail),
            Ok((_, detail)) => (false, format!("{detail}; over the {limit:?} budget")),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.2}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
