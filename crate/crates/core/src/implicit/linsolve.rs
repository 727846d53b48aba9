//! Matrix-free linear solvers for the inverse-Jacobian products.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Dense LU on the assembled operator.
    Direct,
    Cg,
    Gmres,
    /// Truncated Neumann series (Richardson iteration).
    Neumann,
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(SolveMethod::Direct),
            "cg" => Ok(SolveMethod::Cg),
            "gmres" => Ok(SolveMethod::Gmres),
            "neumann" => Ok(SolveMethod::Neumann),
            other => Err(Error::domain(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveConfig {
    pub method: SolveMethod,
    /// Relative residual target: `||Ax - b|| <= tol * max(1, ||b||)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Tikhonov shift added to the Jacobian before solving.
    pub damping: f64,
    pub neumann_terms: usize,
    /// Inner-solver tolerance the solution point was found with; a point whose
    /// optimality residual exceeds ten times this is flagged.
    pub condition_tol: f64,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::Gmres,
            tol: 1e-10,
            max_iter: 1000,
            damping: 1e-6,
            neumann_terms: 50,
            condition_tol: 1e-6,
        }
    }
}

impl LinearSolveConfig {
    pub fn with_method(method: SolveMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::domain("linear solve tolerance must be positive"));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::domain("damping must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `||Ax - b||_2`.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual_of<F: Fn(&[f64]) -> Vec<f64>>(apply: &F, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = apply(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Solves `A x = b` given only the action `x -> A x`.
pub fn solve_linear<F>(apply: F, b: &[f64], cfg: &LinearSolveConfig) -> Result<LinearSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let n = b.len();
    if n == 0 {
        return Ok(LinearSolution {
            x: Vec::new(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = cfg.tol * norm(b).max(1.0);
    match cfg.method {
        SolveMethod::Direct => direct(&apply, b, target),
        SolveMethod::Cg => cg(&apply, b, target, cfg.max_iter),
        SolveMethod::Gmres => gmres(&apply, b, target, cfg.max_iter, n.min(50)),
        SolveMethod::Neumann => neumann(&apply, b, target, cfg.neumann_terms),
    }
}

/// Assembles the operator column by column.
pub fn assemble<F: Fn(&[f64]) -> Vec<f64>>(apply: &F, n: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e);
        check_len("operator output", n, col.len())?;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
        e[j] = 0.0;
    }
    Ok(m)
}

fn direct<F: Fn(&[f64]) -> Vec<f64>>(apply: &F, b: &[f64], target: f64) -> Result<LinearSolution> {
    let n = b.len();
    let m = assemble(apply, n)?;
    let x = m
        .lu()
        .solve(&DVector::from_column_slice(b))
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .map(|x| x.as_slice().to_vec());
    let Some(x) = x else {
        return Err(Error::NonConvergence {
            method: "direct",
            iterations: 1,
            residual: norm(b),
        });
    };
    let residual = norm(&residual_of(apply, &x, b));
    if residual > target {
        return Err(Error::NonConvergence {
            method: "direct",
            iterations: 1,
            residual,
        });
    }
    Ok(LinearSolution {
        x,
        iterations: 1,
        residual,
    })
}

fn cg<F: Fn(&[f64]) -> Vec<f64>>(
    apply: &F,
    b: &[f64],
    target: f64,
    max_iter: usize,
) -> Result<LinearSolution> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(LinearSolution {
                x,
                iterations: it,
                residual: rr.sqrt(),
            });
        }
        let ap = apply(&p);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::NotPositiveDefinite {
                curvature: curvature / dot(&p, &p),
            });
        }
        let alpha = rr / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    // Recurrence residuals drift; report the true one.
    let residual = norm(&residual_of(apply, &x, b));
    if residual <= target {
        return Ok(LinearSolution {
            x,
            iterations: max_iter,
            residual,
        });
    }
    Err(Error::NonConvergence {
        method: "cg",
        iterations: max_iter,
        residual,
    })
}

// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
fn gmres<F: Fn(&[f64]) -> Vec<f64>>(
    apply: &F,
    b: &[f64],
    target: f64,
    max_iter: usize,
    restart: usize,
) -> Result<LinearSolution> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut total = 0;
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    loop {
        if beta <= target {
            return Ok(LinearSolution {
                x,
                iterations: total,
                residual: beta,
            });
        }
        if total >= max_iter {
            return Err(Error::NonConvergence {
                method: "gmres",
                iterations: total,
                residual: beta,
            });
        }
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&basis[k]);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                h[(j, k)] = hjk;
                for i in 0..n {
                    w[i] -= hjk * vj[i];
                }
            }
            let hnext = norm(&w);
            h[(k + 1, k)] = hnext;
            for j in 0..k {
                let (a, c) = (h[(j, k)], h[(j + 1, k)]);
                h[(j, k)] = cs[j] * a + sn[j] * c;
                h[(j + 1, k)] = -sn[j] * a + cs[j] * c;
            }
            let (a, c) = (h[(k, k)], h[(k + 1, k)]);
            let denom = a.hypot(c);
            if denom == 0.0 {
                // Breakdown with a singular Hessenberg column.
                break;
            }
            cs[k] = a / denom;
            sn[k] = c / denom;
            h[(k, k)] = denom;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= target || hnext == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        if k_used == 0 {
            return Err(Error::NonConvergence {
                method: "gmres",
                iterations: total,
                residual: beta,
            });
        }
        // Back substitution on the triangular system.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * basis[j][i];
            }
        }
        let r_new = residual_of(apply, &x, b);
        let beta_new = norm(&r_new);
        if !beta_new.is_finite() {
            return Err(Error::Diverged {
                method: "gmres",
                iterations: total,
            });
        }
        if beta_new >= beta && beta_new > target {
            // Stagnation: another cycle from the same residual would repeat it.
            return Err(Error::NonConvergence {
                method: "gmres",
                iterations: total,
                residual: beta_new,
            });
        }
        r = r_new;
        beta = beta_new;
    }
}

/// Largest eigenvalue magnitude of the operator, by power iteration.
fn spectral_radius_estimate<F: Fn(&[f64]) -> Vec<f64>>(apply: &F, n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sin()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..100 {
        let w = apply(&v);
        let nw = norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            break;
        }
        estimate = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    estimate
}

// Neumann series `x = sum_k (I - s A)^k s b` accumulated as Richardson steps
// `x <- x + s (b - A x)`. The scale `s` normalizes the spectrum of `A` into
// (0, 1] for positive-definite operators; operators already within the unit
// disk around 1 are left unscaled.
fn neumann<F: Fn(&[f64]) -> Vec<f64>>(
    apply: &F,
    b: &[f64],
    target: f64,
    terms: usize,
) -> Result<LinearSolution> {
    let n = b.len();
    let rho = spectral_radius_estimate(apply, n);
    let scale = if rho > 1.0 { 1.0 / (1.05 * rho) } else { 1.0 };
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut r_norm = b_norm;
    for k in 0..terms {
        if r_norm <= target {
            return Ok(LinearSolution {
                x,
                iterations: k,
                residual: r_norm,
            });
        }
        for i in 0..n {
            x[i] += scale * r[i];
        }
        r = residual_of(apply, &x, b);
        r_norm = norm(&r);
        if !r_norm.is_finite() || r_norm > 1e3 * b_norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged {
                method: "neumann",
                iterations: k + 1,
            });
        }
    }
    if r_norm <= target {
        return Ok(LinearSolution {
            x,
            iterations: terms,
            residual: r_norm,
        });
    }
    Err(Error::NonConvergence {
        method: "neumann",
        iterations: terms,
        residual: r_norm,
    })
}
