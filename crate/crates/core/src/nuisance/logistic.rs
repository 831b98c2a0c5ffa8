//! L2-regularised logistic regression by damped Newton iterations.

use super::NuisanceError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Ridge penalty `lambda` on the mean negative log-likelihood.
    pub lambda: f64,
    /// Convergence threshold on the Euclidean norm of the gradient.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Centre and scale covariates before the basis expansion.
    pub standardize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            tolerance: 1e-8,
            max_iterations: 100,
            standardize: true,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Objective
/// `f(beta) = (1/n) sum_i [log(1 + exp(eta_i)) - t_i eta_i] + (lambda/2) |beta|^2`
/// with `eta = Phi beta` for a row-major design matrix `Phi` (n x s).
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    design: Vec<f64>,
    targets: Vec<f64>,
    s: usize,
    lambda: f64,
}

impl LogisticObjective {
    pub fn new(design: Vec<f64>, targets: Vec<f64>, s: usize, lambda: f64) -> Self {
        assert_eq!(design.len(), targets.len() * s, "design shape mismatch");
        Self {
            design,
            targets,
            s,
            lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    fn n(&self) -> usize {
        self.targets.len()
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.design.chunks_exact(self.s)
    }

    fn eta(row: &[f64], beta: &[f64]) -> f64 {
        row.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    /// Mean negative log-likelihood without the penalty.
    pub fn nll(&self, beta: &[f64]) -> f64 {
        let sum: f64 = self
            .rows()
            .zip(&self.targets)
            .map(|(row, &t)| {
                let e = Self::eta(row, beta);
                softplus(e) - t * e
            })
            .sum();
        sum / self.n() as f64
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        self.nll(beta) + 0.5 * self.lambda * beta.iter().map(|b| b * b).sum::<f64>()
    }

    /// Gradient of [`nll`](Self::nll).
    pub fn nll_gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.s];
        for (row, &t) in self.rows().zip(&self.targets) {
            let r = sigmoid(Self::eta(row, beta)) - t;
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
        let n = self.n() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = self.nll_gradient(beta);
        for (gj, bj) in g.iter_mut().zip(beta) {
            *gj += self.lambda * bj;
        }
        g
    }

    pub fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let s = self.s;
        let n = self.n();
        // rows of sqrt(w) Phi, so that H = Phi' W Phi / n + lambda I
        let mut scaled = Vec::with_capacity(n * s);
        for row in self.rows() {
            let p = sigmoid(Self::eta(row, beta));
            let r = (p * (1.0 - p)).sqrt();
            scaled.extend(row.iter().map(|x| r * x));
        }
        // column-major s x n view of the row-major buffer is Phi'
        let phi_t = DMatrix::from_vec(s, n, scaled);
        let mut h = &phi_t * phi_t.transpose() / n as f64;
        for a in 0..s {
            h[(a, a)] += self.lambda;
        }
        h
    }
}

/// Result of a converged Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Below this gradient norm a step that no longer lowers the objective beyond
/// rounding ends the solve as converged.
const STAGNATION_GRADIENT: f64 = 1e-6;

/// Minimise the objective from `beta = 0` with Newton steps and step halving.
pub fn newton_solve(
    objective: &LogisticObjective,
    config: &SolverConfig,
) -> Result<LogisticFit, NuisanceError> {
    let s = objective.dim();
    let mut beta = vec![0.0; s];
    let mut value = objective.value(&beta);
    for iteration in 0..=config.max_iterations {
        let grad = objective.gradient(&beta);
        let gnorm = norm(&grad);
        if !gnorm.is_finite() {
            return Err(NuisanceError::NonFinite("logistic gradient"));
        }
        if gnorm <= config.tolerance {
            return Ok(LogisticFit {
                beta,
                iterations: iteration,
                gradient_norm: gnorm,
            });
        }
        if iteration == config.max_iterations {
            return Err(NuisanceError::NotConverged {
                iterations: iteration,
                gradient_norm: gnorm,
            });
        }
        let step = objective
            .hessian(&beta)
            .cholesky()
            .ok_or(NuisanceError::Singular("logistic hessian"))?
            .solve(&DVector::from_vec(grad.clone()));
        let slope: f64 = grad.iter().zip(step.iter()).map(|(g, d)| g * d).sum();
        let mut alpha = 1.0;
        loop {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(step.iter())
                .map(|(b, d)| b - alpha * d)
                .collect();
            let cand_value = objective.value(&candidate);
            if cand_value <= value - 1e-4 * alpha * slope {
                let stalled = value - cand_value <= 16.0 * f64::EPSILON * value.abs();
                beta = candidate;
                value = cand_value;
                if stalled && gnorm <= STAGNATION_GRADIENT {
                    let gradient_norm = norm(&objective.gradient(&beta));
                    return Ok(LogisticFit {
                        beta,
                        iterations: iteration + 1,
                        gradient_norm,
                    });
                }
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                if gnorm <= STAGNATION_GRADIENT {
                    return Ok(LogisticFit {
                        beta,
                        iterations: iteration,
                        gradient_norm: gnorm,
                    });
                }
                // No representable decrease along the Newton direction.
                return Err(NuisanceError::NotConverged {
                    iterations: iteration,
                    gradient_norm: gnorm,
                });
            }
        }
    }
    unreachable!("loop returns on the final iteration")
}
