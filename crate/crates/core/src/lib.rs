//! Stochastic intervention effect estimation.
//!
//! The crate is organised around four pieces:
//!
//! - [`dataset`]: observational data, CSV ingestion, synthetic benchmark
//!   generators with known potential outcomes, and fold/train-test splitting.
//! - [`nuisance`]: the propensity model (logistic regression on a basis
//!   expansion) and the potential-outcome regressors (boosted trees or ridge).
//! - [`sie`]: the stochastic propensity score, influence-function terms,
//!   cross-fitted estimation of the counterfactual mean under an odds-shift
//!   intervention, the OLS and IPW baselines, and evaluation metrics.
//! - [`gesio`]: a genetic algorithm that searches per-unit stochastic degrees
//!   maximising the total influence-function response.
//!
//! ```
//! use stochint::dataset::{generate_ihdp_like, DgpConfig};
//! use stochint::nuisance::NuisanceConfig;
//! use stochint::sie::{cross_fit, StochasticDegree};
//!
//! let data = generate_ihdp_like(200, 4, 3, &DgpConfig::default()).unwrap();
//! let fitted = cross_fit(&data, 5, 11, &NuisanceConfig::default()).unwrap();
//! let report = fitted.report(StochasticDegree::new(1.5).unwrap());
//! assert!(report.psi_hat.is_finite());
//! ```

pub mod dataset;
pub mod gesio;
pub mod nuisance;
pub mod rng;
pub mod sie;
pub mod stats;

/// Version tag written into every serialized model or report.
pub const FORMAT_VERSION: u32 = 1;
