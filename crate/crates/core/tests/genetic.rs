use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochint::gesio::{
    mutate, optimize_table, optimize_table_with, Bounds, CrossoverOperator, GaConfig, ResponseTable,
};

fn mixed_table(n: usize) -> ResponseTable {
    ResponseTable {
        p_hat: (0..n)
            .map(|i| 0.05 + 0.9 * ((i * 7 % n) as f64 / n as f64))
            .collect(),
        m1: (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    0.5
                } else {
                    2.0 + (i % 5) as f64
                }
            })
            .collect(),
        m0: vec![1.0; n],
    }
}

#[test]
fn full_mutation_is_uniform_on_the_bounds() {
    let cfg = GaConfig {
        mutation_rate: 1.0,
        bounds: Bounds::new(2.0, 6.0).unwrap(),
        ..GaConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draws = vec![4.0; 5000];
    mutate(&mut draws, &cfg, &mut rng);
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = (v - 2.0) / 4.0;
            (cdf - i as f64 / n)
                .abs()
                .max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value
    assert!(ks < 1.63 / n.sqrt(), "ks {ks}");
}

#[test]
fn search_beats_its_initial_population() {
    let table = mixed_table(60);
    let res = optimize_table(&table, &GaConfig::default()).unwrap();
    assert!(res.best_fitness > res.trace.initial_best);
    assert_eq!(res.trace.rows.len(), 100);
    // units with m1 < m0 should be pushed down, the rest up
    let d = res.best.deltas();
    let low: f64 = (0..60).filter(|i| i % 3 == 0).map(|i| d[i]).sum::<f64>() / 20.0;
    let high: f64 = (0..60).filter(|i| i % 3 != 0).map(|i| d[i]).sum::<f64>() / 40.0;
    assert!(high > low + 3.0, "high {high} low {low}");
}

#[test]
fn runs_are_reproducible() {
    let table = mixed_table(30);
    let cfg = GaConfig {
        generations: 20,
        ..GaConfig::default()
    };
    let a = optimize_table(&table, &cfg).unwrap();
    let b = optimize_table(&table, &cfg).unwrap();
    assert_eq!(a, b);
    let c = optimize_table(&table, &GaConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.best.deltas(), c.best.deltas());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_genome_stays_in_bounds(
        seed in 0u64..10_000,
        hi in 0.5..20.0f64,
        eta in 0.5..30.0f64,
        mutation_rate in 0.0..1.0f64,
        uniform in any::<bool>(),
    ) {
        let cfg = GaConfig {
            population_size: 12,
            generations: 8,
            elitism_count: 1,
            mutation_rate,
            bounds: Bounds::new(0.0, hi).unwrap(),
            crossover: if uniform { CrossoverOperator::Uniform } else { CrossoverOperator::Sbx { eta } },
            init_std: 5.0,
            seed,
            ..GaConfig::default()
        };
        let mut outside = 0usize;
        let mut best_seen = Vec::new();
        optimize_table_with(&mixed_table(15), &cfg, |_, pop, fit| {
            outside += pop.iter().flatten().filter(|v| !(0.0..=hi).contains(*v)).count();
            best_seen.push(fit.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }).unwrap();
        prop_assert_eq!(outside, 0);
        prop_assert_eq!(best_seen.len(), 9);
        prop_assert!(best_seen.windows(2).all(|w| w[1] >= w[0]));
    }
}
