//! Genetic search over per-unit stochastic degrees.
//!
//! The genome is a vector `delta` with one degree per unit and the fitness is
//! `sum_i phi(z_i, delta_i)`. Nuisances are cross-fitted once; every fitness
//! call afterwards is a pure function of the genome.
//!
//! Each generation keeps the `elitism_count` best individuals, fills the rest
//! of the population with offspring (tournament selection, pairwise
//! crossover, uniform-redraw mutation) and re-evaluates.

use crate::dataset::ObservationalDataset;
use crate::nuisance::NuisanceLearner;
use crate::rng::{derive_seed, stream_rng};
use crate::sie::{cross_fit, influence, shifted, CrossFitted, NuisanceRecord, SieError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("genome has {found} entries for {expected} units")]
    LengthMismatch { expected: usize, found: usize },
    #[error("degree {value} at unit {unit} lies outside [{lo}, {hi}]")]
    OutOfBounds {
        unit: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Estimation(#[from] SieError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: 10.0 }
    }
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GaError> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<(), GaError> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.hi > self.lo {
            Ok(())
        } else {
            Err(GaError::InvalidConfig(format!(
                "bounds need 0 <= lo < hi, got [{}, {}]",
                self.lo, self.hi
            )))
        }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Per-unit stochastic degrees inside a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionVector {
    deltas: Vec<f64>,
    bounds: Bounds,
}

impl InterventionVector {
    pub fn new(deltas: Vec<f64>, bounds: Bounds) -> Result<Self, GaError> {
        bounds.validate()?;
        if let Some((unit, &value)) = deltas
            .iter()
            .enumerate()
            .find(|(_, v)| !bounds.contains(**v))
        {
            return Err(GaError::OutOfBounds {
                unit,
                value,
                lo: bounds.lo,
                hi: bounds.hi,
            });
        }
        Ok(Self { deltas, bounds })
    }

    pub fn constant(n: usize, delta: f64, bounds: Bounds) -> Result<Self, GaError> {
        Self::new(vec![delta; n], bounds)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.deltas)
    }

    /// CSV with columns `unit_index, delta`.
    pub fn write_csv(&self, path: &Path) -> Result<(), GaError> {
        let mut text = String::from("unit_index,delta\n");
        for (i, d) in self.deltas.iter().enumerate() {
            text.push_str(&format!("{i},{d:?}\n"));
        }
        write_file(path, &text)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), GaError> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| GaError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossoverOperator {
    /// Simulated binary crossover with distribution index `eta`.
    Sbx { eta: f64 },
    /// Swap each coordinate with probability 1/2.
    Uniform,
}

impl Default for CrossoverOperator {
    fn default() -> Self {
        CrossoverOperator::Sbx { eta: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Population size `m`; even so parents pair up exactly.
    pub population_size: usize,
    pub generations: usize,
    /// Per-coordinate probability of applying the crossover operator.
    pub crossover_rate: f64,
    /// Per-coordinate probability of a uniform redraw in the bounds.
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub crossover: CrossoverOperator,
    pub bounds: Bounds,
    pub init_mean: f64,
    pub init_std: f64,
    pub seed: u64,
    /// Record the best genome every this many generations (0 disables).
    pub snapshot_every: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 100,
            crossover_rate: 0.9,
            mutation_rate: 0.02,
            elitism_count: 2,
            tournament_size: 3,
            crossover: CrossoverOperator::default(),
            bounds: Bounds::default(),
            init_mean: 1.0,
            init_std: 1.0,
            seed: 0,
            snapshot_every: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let fail = |m: String| Err(GaError::InvalidConfig(m));
        self.bounds.validate()?;
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return fail(format!(
                "population_size must be even and >= 4, got {}",
                self.population_size
            ));
        }
        if self.generations == 0 {
            return fail("generations must be >= 1".into());
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.elitism_count == 0 || self.elitism_count >= self.population_size {
            return fail(format!(
                "elitism_count must lie in [1, population_size), got {}",
                self.elitism_count
            ));
        }
        if self.tournament_size < 2 {
            return fail(format!(
                "tournament_size must be >= 2, got {}",
                self.tournament_size
            ));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite() && self.init_mean.is_finite()) {
            return fail(format!(
                "initial distribution N({}, {}) is invalid",
                self.init_mean, self.init_std
            ));
        }
        if let CrossoverOperator::Sbx { eta } = self.crossover {
            if !(eta >= 0.0 && eta.is_finite()) {
                return fail(format!("SBX eta must be finite and >= 0, got {eta}"));
            }
        }
        Ok(())
    }
}

/// Per-unit terms needed to evaluate `phi(z_i, delta_i)` for any degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    pub p_hat: Vec<f64>,
    pub m1: Vec<f64>,
    pub m0: Vec<f64>,
}

impl ResponseTable {
    pub fn from_records(records: &[NuisanceRecord]) -> Self {
        Self {
            p_hat: records.iter().map(|r| r.p_hat).collect(),
            m1: records.iter().map(|r| r.m1).collect(),
            m0: records.iter().map(|r| r.m0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.p_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hat.is_empty()
    }

    fn total(&self, deltas: &[f64]) -> f64 {
        deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| influence(shifted(self.p_hat[i], d), self.m1[i], self.m0[i]))
            .sum()
    }
}

/// `sum_i phi(z_i, delta_i)`.
pub fn fitness(delta: &InterventionVector, table: &ResponseTable) -> Result<f64, GaError> {
    if delta.len() != table.len() {
        return Err(GaError::LengthMismatch {
            expected: table.len(),
            found: delta.len(),
        });
    }
    Ok(table.total(delta.deltas()))
}

/// One draw from the initial distribution: `N(init_mean, init_std)` per
/// coordinate, clamped to the bounds.
pub fn sample_initial(n: usize, config: &GaConfig, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(config.init_mean, config.init_std).expect("validated std");
    (0..n)
        .map(|_| config.bounds.clamp(normal.sample(rng)))
        .collect()
}

const INIT_STREAM: u64 = 0;

pub fn initialize_population(n: usize, config: &GaConfig) -> Vec<Vec<f64>> {
    let base = derive_seed(config.seed, INIT_STREAM);
    (0..config.population_size)
        .map(|i| sample_initial(n, config, &mut stream_rng(base, i as u64)))
        .collect()
}

/// Tournament selection with replacement: each of the `m` slots receives the
/// fittest of `tournament_size` uniformly drawn individuals (lowest index on
/// ties). Returns indices into the population.
pub fn select_parents(fitnesses: &[f64], config: &GaConfig, rng: &mut impl Rng) -> Vec<usize> {
    let m = fitnesses.len();
    (0..config.population_size)
        .map(|_| {
            let mut best = rng.random_range(0..m);
            for _ in 1..config.tournament_size {
                let c = rng.random_range(0..m);
                if fitnesses[c] > fitnesses[best] || (fitnesses[c] == fitnesses[best] && c < best) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn sbx_beta(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Children before clamping.
pub fn crossover_unclamped(
    a: &[f64],
    b: &[f64],
    config: &GaConfig,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), b.len(), "parents differ in length");
    let mut ca = a.to_vec();
    let mut cb = b.to_vec();
    for i in 0..a.len() {
        if rng.random::<f64>() >= config.crossover_rate || a[i] == b[i] {
            continue;
        }
        match config.crossover {
            CrossoverOperator::Sbx { eta } => {
                let beta = sbx_beta(rng.random::<f64>(), eta);
                let near_a = 0.5 * ((1.0 + beta) * a[i] + (1.0 - beta) * b[i]);
                let near_b = 0.5 * ((1.0 - beta) * a[i] + (1.0 + beta) * b[i]);
                // children take either side at random, as in the usual SBX
                if rng.random::<bool>() {
                    ca[i] = near_b;
                    cb[i] = near_a;
                } else {
                    ca[i] = near_a;
                    cb[i] = near_b;
                }
            }
            CrossoverOperator::Uniform => {
                if rng.random::<bool>() {
                    ca[i] = b[i];
                    cb[i] = a[i];
                }
            }
        }
    }
    (ca, cb)
}

pub fn crossover(
    a: &[f64],
    b: &[f64],
    config: &GaConfig,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let (mut ca, mut cb) = crossover_unclamped(a, b, config, rng);
    for v in ca.iter_mut().chain(cb.iter_mut()) {
        *v = config.bounds.clamp(*v);
    }
    (ca, cb)
}

/// Redraw each coordinate uniformly in the bounds with probability
/// `mutation_rate`.
pub fn mutate(individual: &mut [f64], config: &GaConfig, rng: &mut impl Rng) {
    let Bounds { lo, hi } = config.bounds;
    for v in individual.iter_mut() {
        if rng.random::<f64>() < config.mutation_rate {
            *v = lo + (hi - lo) * rng.random::<f64>();
        }
        *v = config.bounds.clamp(*v);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaTrace {
    pub initial_best: f64,
    pub initial_mean: f64,
    /// One row per generation, starting at generation 1.
    pub rows: Vec<TraceRow>,
    /// `(generation, best genome)` at the configured cadence.
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

impl GaTrace {
    pub fn to_csv(&self) -> String {
        let mut text = String::from("generation,best_fitness,mean_fitness\n");
        for r in &self.rows {
            text.push_str(&format!(
                "{},{:?},{:?}\n",
                r.generation, r.best_fitness, r.mean_fitness
            ));
        }
        text
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), GaError> {
        write_file(path, &self.to_csv())
    }
}

/// Outcome of a search on a fixed response table.
#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: InterventionVector,
    pub best_fitness: f64,
    pub trace: GaTrace,
}

fn evaluate(population: &[Vec<f64>], table: &ResponseTable) -> Vec<f64> {
    population.par_iter().map(|d| table.total(d)).collect()
}

/// Index of the fittest individual, lowest index on ties.
fn argmax(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fitnesses.iter().enumerate() {
        if f > fitnesses[best] {
            best = i;
        }
    }
    best
}

fn ranked(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
    order
}

/// Run the search on precomputed per-unit terms. `observer` sees every
/// population with its fitness values, starting with the initial one
/// (generation 0).
pub fn optimize_table_with<F>(
    table: &ResponseTable,
    config: &GaConfig,
    mut observer: F,
) -> Result<GaResult, GaError>
where
    F: FnMut(usize, &[Vec<f64>], &[f64]),
{
    config.validate()?;
    let n = table.len();
    let m = config.population_size;
    let mut population = initialize_population(n, config);
    let mut fit = evaluate(&population, table);
    observer(0, &population, &fit);
    let mut trace = GaTrace {
        initial_best: fit[argmax(&fit)],
        initial_mean: crate::stats::mean(&fit),
        rows: Vec::with_capacity(config.generations),
        snapshots: Vec::new(),
    };

    for generation in 1..=config.generations {
        let gen_seed = derive_seed(config.seed, generation as u64);
        let parents = select_parents(&fit, config, &mut stream_rng(gen_seed, 0));
        let offspring: Vec<Vec<f64>> = parents
            .par_chunks(2)
            .enumerate()
            .flat_map_iter(|(pair, idx)| {
                let mut rng: ChaCha8Rng = stream_rng(gen_seed, pair as u64 + 1);
                let (mut a, mut b) =
                    crossover(&population[idx[0]], &population[idx[1]], config, &mut rng);
                mutate(&mut a, config, &mut rng);
                mutate(&mut b, config, &mut rng);
                [a, b]
            })
            .collect();

        let order = ranked(&fit);
        let mut next: Vec<Vec<f64>> = order[..config.elitism_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let mut next_fit: Vec<f64> = order[..config.elitism_count]
            .iter()
            .map(|&i| fit[i])
            .collect();
        let children = &offspring[..m - config.elitism_count];
        next_fit.extend(evaluate(children, table));
        next.extend(children.iter().cloned());
        population = next;
        fit = next_fit;
        observer(generation, &population, &fit);

        let best = argmax(&fit);
        trace.rows.push(TraceRow {
            generation,
            best_fitness: fit[best],
            mean_fitness: crate::stats::mean(&fit),
        });
        if config.snapshot_every > 0 && generation % config.snapshot_every == 0 {
            trace.snapshots.push((generation, population[best].clone()));
        }
    }

    let best = argmax(&fit);
    Ok(GaResult {
        best: InterventionVector::new(population.swap_remove(best), config.bounds)?,
        best_fitness: fit[best],
        trace,
    })
}

pub fn optimize_table(table: &ResponseTable, config: &GaConfig) -> Result<GaResult, GaError> {
    optimize_table_with(table, config, |_, _, _| {})
}

/// Search result together with the cross-fitted nuisances it was scored on.
#[derive(Debug, Clone)]
pub struct Optimization {
    pub result: GaResult,
    pub nuisances: CrossFitted,
}

impl Optimization {
    /// Mean response `fitness / n` of a genome under the same nuisances.
    pub fn expected_response(&self, deltas: &[f64]) -> Result<f64, GaError> {
        Ok(self.nuisances.expected_response(deltas)?)
    }
}

/// Cross-fit the nuisances once, then search for the degrees maximising the
/// total response.
pub fn optimize<L: NuisanceLearner>(
    data: &ObservationalDataset,
    config: &GaConfig,
    learner: &L,
    k: usize,
    seed: u64,
) -> Result<Optimization, GaError> {
    config.validate()?;
    let nuisances = cross_fit(data, k, seed, learner)?;
    let table = ResponseTable::from_records(&nuisances.records);
    let result = optimize_table(&table, config)?;
    Ok(Optimization { result, nuisances })
}
