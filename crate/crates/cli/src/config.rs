//! Serializable experiment configurations.
//!
//! Every command reads an optional TOML or JSON file into its config struct,
//! applies command-line overrides, resolves defaults and echoes the resolved
//! struct as `config.json` in the run directory. Feeding that file back with
//! `--config` reproduces the run.

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use stochint::dataset::{
    generate_ihdp_like, generate_linear, generate_op_like_with, load_csv, load_truth_csv,
    ColumnSchema, DgpConfig, ObservationalDataset, OpConfig, OP_COVARIATES,
};
use stochint::gesio::GaConfig;
use stochint::nuisance::{NuisanceConfig, PropensityConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    IhdpLike,
    Linear,
    OpLike,
    Csv,
}

impl FromStr for SourceKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "ihdp_like" | "ihdp" => SourceKind::IhdpLike,
            "linear" => SourceKind::Linear,
            "op_like" | "op" => SourceKind::OpLike,
            "csv" => SourceKind::Csv,
            other => bail!("unknown data source {other:?} (ihdp-like, linear, op-like, csv)"),
        })
    }
}

/// Where a dataset comes from: a generator with its knobs, or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSpec {
    pub source: SourceKind,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: u64,
    pub noise_scale: Option<f64>,
    pub treated_fraction_target: Option<f64>,
    pub propensity_clip: Option<f64>,
    /// OP-like data only: share of units with `mu1 > mu0`.
    pub positive_effect_fraction: Option<f64>,
    pub path: Option<PathBuf>,
    /// Truth side-file (`unit_index, mu0, mu1[, true_propensity]`).
    pub truth_path: Option<PathBuf>,
    pub schema: ColumnSchema,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            source: SourceKind::IhdpLike,
            n: None,
            d: None,
            seed: 0,
            noise_scale: None,
            treated_fraction_target: None,
            propensity_clip: None,
            positive_effect_fraction: None,
            path: None,
            truth_path: None,
            schema: ColumnSchema::default(),
        }
    }
}

impl DataSpec {
    /// Fill generator defaults so the echoed config is explicit.
    pub fn resolve(&mut self) -> Result<()> {
        match self.source {
            SourceKind::IhdpLike | SourceKind::Linear => {
                let dgp = DgpConfig::default();
                self.n.get_or_insert(747);
                self.d.get_or_insert(25);
                self.noise_scale.get_or_insert(dgp.noise_scale);
                self.treated_fraction_target
                    .get_or_insert(dgp.treated_fraction_target);
                self.propensity_clip.get_or_insert(dgp.propensity_clip);
                self.positive_effect_fraction = None;
            }
            SourceKind::OpLike => {
                let op = OpConfig::default();
                self.n.get_or_insert(10_000);
                match self.d {
                    None => self.d = Some(OP_COVARIATES.len()),
                    Some(d) if d == OP_COVARIATES.len() => {}
                    Some(d) => bail!(
                        "op-like data has {} covariates, got d={d}",
                        OP_COVARIATES.len()
                    ),
                }
                self.noise_scale.get_or_insert(op.noise_scale);
                self.treated_fraction_target
                    .get_or_insert(op.treated_fraction_target);
                self.propensity_clip.get_or_insert(op.propensity_clip);
                self.positive_effect_fraction
                    .get_or_insert(op.positive_effect_fraction);
            }
            SourceKind::Csv => {
                if self.path.is_none() {
                    bail!("csv source needs a file path (--data)");
                }
            }
        }
        Ok(())
    }

    pub fn is_generated(&self) -> bool {
        self.source != SourceKind::Csv
    }

    /// Generate with an explicit size and seed (generator sources only).
    pub fn generate(&self, n: usize, seed: u64) -> Result<ObservationalDataset> {
        let data = match self.source {
            SourceKind::IhdpLike | SourceKind::Linear => {
                let cfg = DgpConfig {
                    noise_scale: self.noise_scale.unwrap_or(DgpConfig::default().noise_scale),
                    treated_fraction_target: self
                        .treated_fraction_target
                        .unwrap_or(DgpConfig::default().treated_fraction_target),
                    propensity_clip: self
                        .propensity_clip
                        .unwrap_or(DgpConfig::default().propensity_clip),
                };
                let d = self.d.unwrap_or(25);
                if self.source == SourceKind::Linear {
                    generate_linear(n, d, seed, &cfg)?
                } else {
                    generate_ihdp_like(n, d, seed, &cfg)?
                }
            }
            SourceKind::OpLike => {
                let def = OpConfig::default();
                let cfg = OpConfig {
                    noise_scale: self.noise_scale.unwrap_or(def.noise_scale),
                    treated_fraction_target: self
                        .treated_fraction_target
                        .unwrap_or(def.treated_fraction_target),
                    positive_effect_fraction: self
                        .positive_effect_fraction
                        .unwrap_or(def.positive_effect_fraction),
                    propensity_clip: self.propensity_clip.unwrap_or(def.propensity_clip),
                };
                generate_op_like_with(n, seed, &cfg)?
            }
            SourceKind::Csv => bail!("a csv source cannot be regenerated"),
        };
        Ok(data)
    }

    /// The dataset this spec describes.
    pub fn load(&self) -> Result<ObservationalDataset> {
        if self.is_generated() {
            return self.generate(self.n.unwrap_or(747), self.seed);
        }
        let path = self
            .path
            .as_deref()
            .context("csv source needs a file path")?;
        let data = load_csv(path, &self.schema)?;
        match &self.truth_path {
            Some(t) => {
                let truth = load_truth_csv(t, data.n())?;
                Ok(data.with_truth(truth)?)
            }
            None => Ok(data),
        }
    }
}

/// Inclusive grid `lo, lo + step, ..., <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl DeltaGrid {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.hi >= self.lo && self.step > 0.0 && self.hi.is_finite()) {
            bail!(
                "delta grid needs 0 <= lo <= hi and step > 0, got {}:{}:{}",
                self.lo,
                self.hi,
                self.step
            );
        }
        Ok(())
    }
}

impl FromStr for DeltaGrid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            bail!("delta grid must look like lo:hi:step, got {s:?}");
        };
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .with_context(|| format!("bad number {v:?} in delta grid"))
        };
        let grid = DeltaGrid {
            lo: parse(lo)?,
            hi: parse(hi)?,
            step: parse(step)?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sie,
    Ols,
    Ipwe,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sie, Method::Ols, Method::Ipwe];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sie => "sie",
            Method::Ols => "ols",
            Method::Ipwe => "ipwe",
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sie" => Method::Sie,
            "ols" => Method::Ols,
            "ipwe" | "ipw" => Method::Ipwe,
            other => bail!("unknown method {other:?} (sie, ols, ipwe)"),
        })
    }
}

/// Parse `a,b,c`; `all` expands to every method.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut methods = s
        .split(',')
        .map(Method::from_str)
        .collect::<Result<Vec<_>>>()?;
    methods.sort();
    methods.dedup();
    Ok(methods)
}

pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("bad size {v:?}"))
        })
        .collect()
}

/// How replications differ from each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replicate {
    /// Fresh dataset per replication (new generator seed) and new split.
    #[default]
    Dgp,
    /// One fixed dataset; only the split and fold seeds change.
    Seed,
}

impl FromStr for Replicate {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dgp" => Replicate::Dgp,
            "seed" => Replicate::Seed,
            other => bail!("unknown replicate mode {other:?} (dgp, seed)"),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub data: DataSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub data: DataSpec,
    pub delta: f64,
    pub delta_grid: Option<DeltaGrid>,
    pub folds: usize,
    pub seed: u64,
    pub nuisance: NuisanceConfig,
    /// Evaluate a saved nuisance model on every unit instead of cross-fitting.
    pub model: Option<PathBuf>,
    /// Also fit the nuisances on all units and save them under `models/`.
    pub save_model: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            delta: 1.0,
            delta_grid: None,
            folds: 5,
            seed: 0,
            nuisance: NuisanceConfig::default(),
            model: None,
            save_model: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub data: DataSpec,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub replicate: Replicate,
    /// Extra dataset sizes for error-versus-size tables.
    pub sizes: Vec<usize>,
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub nuisance: NuisanceConfig,
    /// Propensity model of the IPW baseline; defaults to the nuisance one.
    pub ipwe: Option<PropensityConfig>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            methods: Method::ALL.to_vec(),
            replications: 100,
            replicate: Replicate::Dgp,
            sizes: Vec::new(),
            test_fraction: 0.2,
            folds: 5,
            seed: 0,
            nuisance: NuisanceConfig::default(),
            ipwe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub data: DataSpec,
    pub folds: usize,
    /// Fold seed of the cross-fitting.
    pub seed: u64,
    pub ga: GaConfig,
    pub nuisance: NuisanceConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            data: DataSpec {
                source: SourceKind::OpLike,
                ..DataSpec::default()
            },
            folds: 5,
            seed: 0,
            ga: GaConfig::default(),
            nuisance: NuisanceConfig::default(),
        }
    }
}

impl SimulateConfig {
    pub fn resolve(&mut self) -> Result<()> {
        if !self.data.is_generated() {
            bail!("simulate needs a generator source, not csv");
        }
        self.data.resolve()
    }
}

fn check_folds(k: usize) -> Result<()> {
    if k < 2 {
        bail!("need at least 2 folds, got {k}");
    }
    Ok(())
}

impl EstimateConfig {
    pub fn resolve(&mut self) -> Result<()> {
        self.data.resolve()?;
        check_folds(self.folds)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            bail!("delta must be finite and >= 0, got {}", self.delta);
        }
        if let Some(g) = &self.delta_grid {
            g.validate()?;
        }
        Ok(())
    }
}

impl BenchmarkConfig {
    pub fn resolve(&mut self) -> Result<()> {
        self.data.resolve()?;
        check_folds(self.folds)?;
        if self.replications == 0 {
            bail!("need at least one replication");
        }
        if self.methods.is_empty() {
            bail!("no methods selected");
        }
        self.methods.sort();
        self.methods.dedup();
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            bail!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            );
        }
        if !self.sizes.is_empty() && !self.data.is_generated() {
            bail!("a size grid needs a generator source");
        }
        if self.replicate == Replicate::Dgp && !self.data.is_generated() {
            bail!("--replicate dgp needs a generator source; use --replicate seed for csv data");
        }
        if self.ipwe.is_none() {
            self.ipwe = Some(self.nuisance.propensity.clone());
        }
        Ok(())
    }
}

impl OptimizeConfig {
    pub fn resolve(&mut self) -> Result<()> {
        self.data.resolve()?;
        check_folds(self.folds)?;
        self.ga.validate()?;
        Ok(())
    }
}

/// Read a config file; `.json` is parsed as JSON, anything else as TOML.
pub fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text)
            .with_context(|| format!("invalid JSON config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display()))
    }
}
