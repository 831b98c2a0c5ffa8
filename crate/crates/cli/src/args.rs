//! Command-line front end. Flags override values from `--config`.

use crate::config::{
    parse_methods, parse_sizes, read_config, BenchmarkConfig, DataSpec, DeltaGrid, EstimateConfig,
    OptimizeConfig, Replicate, SimulateConfig, SourceKind,
};
use crate::output::default_out_dir;
use crate::{benchmark, estimate, optimize, simulate};
use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use stochint::gesio::CrossoverOperator;
use stochint::nuisance::{BasisKind, OutcomeArchitecture, OutcomeKind};

/// Stochastic intervention effect estimation and policy search.
///
/// Outputs go to `--out`, or `$SIE_OUTPUT_ROOT/<command>` (default
/// `runs/<command>`): `config.json`, `report.json` and `tables/*.csv`.
#[derive(Debug, Parser)]
#[command(name = "sie", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset and write it with its truth file.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Cross-fitted estimates at one degree or over a grid of degrees.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        nuisance: NuisanceArgs,
        /// Stochastic degree (odds multiplier).
        #[arg(long)]
        delta: Option<f64>,
        /// Degree grid `lo:hi:step`, e.g. `0:10:0.5`.
        #[arg(long)]
        delta_grid: Option<DeltaGrid>,
        #[arg(long)]
        folds: Option<usize>,
        /// Use a saved nuisance model instead of cross-fitting.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Fit on all units and save the model under `models/`.
        #[arg(long)]
        save_model: bool,
    },
    /// ATE error of sie, ols and ipwe over repeated splits.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        nuisance: NuisanceArgs,
        /// Comma-separated methods or `all`.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        replications: Option<usize>,
        /// Comma-separated dataset sizes for the error-versus-size table.
        #[arg(long)]
        sizes: Option<String>,
        /// `dgp` redraws the data per replication, `seed` only the split.
        #[arg(long)]
        replicate: Option<Replicate>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Search per-unit degrees with the genetic algorithm.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        nuisance: NuisanceArgs,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        mutation_rate: Option<f64>,
        #[arg(long)]
        crossover_rate: Option<f64>,
        /// `sbx` or `uniform`.
        #[arg(long)]
        crossover: Option<String>,
        /// Upper bound of every degree.
        #[arg(long)]
        max_delta: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Master seed (folds, splits and the genetic algorithm).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `ihdp-like`, `linear`, `op-like` or `csv`.
    #[arg(long)]
    pub source: Option<SourceKind>,
    /// CSV file; implies `--source csv`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Truth side-file for CSV data.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub treatment_column: Option<String>,
    #[arg(long)]
    pub outcome_column: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub treated_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NuisanceArgs {
    /// Propensity basis: `raw`, `poly2` or `rbf:<centers>`.
    #[arg(long)]
    pub basis: Option<String>,
    /// Outcome learner: `trees` or `ridge`.
    #[arg(long)]
    pub outcome_model: Option<String>,
    /// Outcome architecture: `per-arm` or `joint`.
    #[arg(long)]
    pub architecture: Option<String>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

impl DataArgs {
    fn apply(self, spec: &mut DataSpec) {
        if let Some(s) = self.source {
            spec.source = s;
        }
        if let Some(p) = self.data {
            spec.source = SourceKind::Csv;
            spec.path = Some(p);
        }
        if let Some(p) = self.truth {
            spec.truth_path = Some(p);
        }
        if let Some(c) = self.treatment_column {
            spec.schema.treatment = c;
        }
        if let Some(c) = self.outcome_column {
            spec.schema.outcome = c;
        }
        macro_rules! set {
            ($($field:ident <- $arg:ident),*) => {$(
                if let Some(v) = self.$arg {
                    spec.$field = Some(v);
                }
            )*};
        }
        set!(n <- n, d <- d, noise_scale <- noise_scale, treated_fraction_target <- treated_fraction);
        if let Some(s) = self.data_seed {
            spec.seed = s;
        }
    }
}

fn parse_basis(s: &str) -> Result<BasisKind> {
    Ok(match s {
        "raw" | "linear" => BasisKind::Raw,
        "poly2" | "polynomial2" => BasisKind::Polynomial2,
        _ => match s.strip_prefix("rbf:") {
            Some(c) => BasisKind::Rbf {
                centers: c.parse()?,
                seed: 0,
            },
            None => bail!("unknown basis {s:?} (raw, poly2, rbf:<centers>)"),
        },
    })
}

impl NuisanceArgs {
    fn apply(self, cfg: &mut stochint::nuisance::NuisanceConfig) -> Result<()> {
        if let Some(b) = self.basis {
            cfg.propensity.basis = parse_basis(&b)?;
        }
        if let Some(m) = self.outcome_model {
            cfg.outcome.kind = match m.as_str() {
                "trees" | "boosted_trees" | "gbt" => OutcomeKind::BoostedTrees,
                "ridge" | "linear" => OutcomeKind::RidgeLinear,
                other => bail!("unknown outcome model {other:?} (trees, ridge)"),
            };
        }
        if let Some(a) = self.architecture {
            cfg.outcome.architecture = match a.replace('_', "-").as_str() {
                "per-arm" => OutcomeArchitecture::PerArm,
                "joint" => OutcomeArchitecture::Joint,
                other => bail!("unknown architecture {other:?} (per-arm, joint)"),
            };
        }
        if let Some(t) = self.n_trees {
            cfg.outcome.n_trees = t;
        }
        if let Some(d) = self.max_depth {
            cfg.outcome.max_depth = d;
        }
        Ok(())
    }
}

fn out_dir(out: Option<PathBuf>, command: &str) -> PathBuf {
    out.unwrap_or_else(|| default_out_dir(command))
}

/// Execute a parsed command line; returns the summary printed to stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate { common, data } => {
            let mut cfg: SimulateConfig = read_config(common.config.as_deref())?;
            data.apply(&mut cfg.data);
            if let Some(s) = common.seed {
                cfg.data.seed = s;
            }
            let (report, dir) = simulate::run(&cfg, &out_dir(common.out, "simulate"))?;
            Ok(format!(
                "n={} treated={} true_ate={:.6}\nwrote {}",
                report.n,
                report.n_treated,
                report.true_ate,
                dir.display()
            ))
        }
        Command::Estimate {
            common,
            data,
            nuisance,
            delta,
            delta_grid,
            folds,
            model,
            save_model,
        } => {
            let mut cfg: EstimateConfig = read_config(common.config.as_deref())?;
            data.apply(&mut cfg.data);
            nuisance.apply(&mut cfg.nuisance)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(d) = delta {
                cfg.delta = d;
            }
            if delta_grid.is_some() {
                cfg.delta_grid = delta_grid;
            }
            if let Some(k) = folds {
                cfg.folds = k;
            }
            if model.is_some() {
                cfg.model = model;
            }
            cfg.save_model |= save_model;
            let (outcome, dir) = estimate::run(&cfg, &out_dir(common.out, "estimate"))?;
            let e = &outcome.estimate;
            let mut text = format!(
                "delta={} psi_hat={:.6} tau_sie={:.6} tau_ate={:.6}",
                e.delta.value(),
                e.psi_hat,
                e.tau_sie,
                e.tau_ate_contrast
            );
            if let (Some(t), Some(eps)) = (outcome.true_ate, outcome.epsilon_ate) {
                text.push_str(&format!(" true_ate={t:.6} epsilon_ate={eps:.6}"));
            }
            text.push_str(&format!("\nwrote {}", dir.display()));
            Ok(text)
        }
        Command::Benchmark {
            common,
            data,
            nuisance,
            methods,
            replications,
            sizes,
            replicate,
            test_fraction,
            folds,
        } => {
            let mut cfg: BenchmarkConfig = read_config(common.config.as_deref())?;
            data.apply(&mut cfg.data);
            nuisance.apply(&mut cfg.nuisance)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(m) = methods {
                cfg.methods = parse_methods(&m)?;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(s) = sizes {
                cfg.sizes = parse_sizes(&s)?;
            }
            if let Some(r) = replicate {
                cfg.replicate = r;
            }
            if let Some(f) = test_fraction {
                cfg.test_fraction = f;
            }
            if let Some(k) = folds {
                cfg.folds = k;
            }
            let (result, dir) = benchmark::run(&cfg, &out_dir(common.out, "benchmark"))?;
            let mut text = String::from("method split mean_epsilon std_epsilon\n");
            for r in &result.summary {
                text.push_str(&format!(
                    "{} {:?} {:.4} {:.4}\n",
                    r.method.name(),
                    r.split,
                    r.mean_epsilon,
                    r.std_epsilon
                ));
            }
            text.push_str(&format!("wrote {}", dir.display()));
            Ok(text)
        }
        Command::Optimize {
            common,
            data,
            nuisance,
            folds,
            generations,
            population,
            mutation_rate,
            crossover_rate,
            crossover,
            max_delta,
        } => {
            let mut cfg: OptimizeConfig = read_config(common.config.as_deref())?;
            data.apply(&mut cfg.data);
            nuisance.apply(&mut cfg.nuisance)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
                cfg.ga.seed = s;
            }
            if let Some(k) = folds {
                cfg.folds = k;
            }
            if let Some(g) = generations {
                cfg.ga.generations = g;
            }
            if let Some(m) = population {
                cfg.ga.population_size = m;
            }
            if let Some(r) = mutation_rate {
                cfg.ga.mutation_rate = r;
            }
            if let Some(r) = crossover_rate {
                cfg.ga.crossover_rate = r;
            }
            if let Some(c) = crossover {
                cfg.ga.crossover = match c.as_str() {
                    "sbx" => CrossoverOperator::default(),
                    "uniform" => CrossoverOperator::Uniform,
                    other => bail!("unknown crossover {other:?} (sbx, uniform)"),
                };
            }
            if let Some(hi) = max_delta {
                cfg.ga.bounds.hi = hi;
            }
            let (report, dir) = optimize::run(&cfg, &out_dir(common.out, "optimize"))?;
            let r = &report.expected_response;
            Ok(format!(
                "expected response: optimized={:.6} observed-policy={:.6} random={:.6} (mean delta {:.3})\nwrote {}",
                r.optimized,
                r.status_quo,
                r.random,
                report.mean_delta,
                dir.display()
            ))
        }
    }
}
