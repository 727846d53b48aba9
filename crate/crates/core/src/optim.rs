//! Plain gradient descent for the inner and outer loops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GDConfig {
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once the gradient's max-norm is at most this.
    pub tol: f64,
    /// Seed for randomized initial points.
    pub seed: u64,
}

impl GDConfig {
    pub fn new(learning_rate: f64, max_iter: usize, tol: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            learning_rate,
            max_iter,
            tol,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::domain("learning rate must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::domain("tolerance must be non-negative"));
        }
        Ok(())
    }
}

impl Default for GDConfig {
    /// Inner-loop settings used for the variational eigensolver.
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_iter: 5000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    /// One entry per visited point, starting with the initial point.
    pub iterates: Vec<TraceStep>,
    pub converged: bool,
    pub final_point: Vec<f64>,
}

impl OptimTrace {
    /// Number of update steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.iterates.last().map_or(f64::INFINITY, |s| s.grad_norm)
    }

    pub fn final_objective(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |s| s.objective)
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Gradient descent `x <- x - lr * grad(x)`.
///
/// Stops when the gradient max-norm drops to `cfg.tol` (converged) or after
/// `cfg.max_iter` steps (not converged). A non-finite objective, gradient or
/// iterate is an error carrying the last finite point.
pub fn minimize(
    mut objective: impl FnMut(&[f64]) -> f64,
    mut gradient: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &GDConfig,
) -> Result<OptimTrace> {
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial point must be finite"));
    }
    let mut x = x0.to_vec();
    let mut iterates = Vec::new();
    for iteration in 0..=cfg.max_iter {
        let g = gradient(&x);
        let f = objective(&x);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration,
                last_finite: x,
            });
        }
        let grad_norm = max_norm(&g);
        iterates.push(TraceStep {
            iteration,
            objective: f,
            grad_norm,
        });
        if grad_norm <= cfg.tol {
            return Ok(OptimTrace {
                iterates,
                converged: true,
                final_point: x,
            });
        }
        if iteration == cfg.max_iter {
            break;
        }
        let next: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| xi - cfg.learning_rate * gi)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: iteration + 1,
                last_finite: x,
            });
        }
        x = next;
    }
    Ok(OptimTrace {
        iterates,
        converged: false,
        final_point: x,
    })
}
