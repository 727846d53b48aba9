//! Implicit differentiation of solution maps.
//!
//! A problem defines `z*(a)` through either a root condition `f(z*, a) = 0` or
//! a fixed-point condition `f(z*, a) = z*`. With `A = ∂_z f` and `B = ∂_a f`
//! at a solution, the sensitivities are
//!
//! * root: `∂_a z* = -(A + λI)^{-1} B`
//! * fixed point: `∂_a z* = (I - A + λI)^{-1} B`
//!
//! where `λ` is the configured damping. Vector-Jacobian products solve the
//! transposed system once (`Mᵀ u = v`) and contract `u` with `B`, so the
//! inverse is never formed.

mod linsolve;

pub use linsolve::{assemble, solve_linear, LinearSolution, LinearSolveConfig, SolveMethod};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diff::{grad_z, hessian_zz, mixed_jacobian_za, ScalarField};
use crate::error::{check_len, Error, Result};
use crate::optim::{max_norm, minimize, GDConfig, OptimTrace, TraceStep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    /// `f(z, a) = 0`.
    Root,
    /// `f(z, a) = z`.
    FixedPoint,
}

/// An optimality condition with its Jacobians.
pub trait OptimalityProblem {
    fn kind(&self) -> ProblemKind;
    fn dim_z(&self) -> usize;
    fn dim_a(&self) -> usize;

    /// `f(z, a)`, a vector of length `dim_z`.
    fn condition(&self, z: &[f64], a: &[f64]) -> Result<Vec<f64>>;

    /// `A = ∂_z f`, `dim_z x dim_z`.
    fn jacobian_z(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>>;

    /// `B = ∂_a f`, `dim_z x dim_a`.
    fn jacobian_a(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>>;

    /// Scalar whose gradient is `f`, when one exists. Used only for traces.
    fn objective(&self, _z: &[f64], _a: &[f64]) -> Option<f64> {
        None
    }
}

/// First-order optimality of a scalar field: `f = ∂_z E`.
///
/// Jacobians come from [`crate::diff`]: `A` is the (shift-rule) Hessian and
/// `B` the transposed mixed Jacobian.
#[derive(Clone, Debug)]
pub struct Stationarity<F> {
    pub field: F,
}

impl<F: ScalarField> Stationarity<F> {
    pub fn new(field: F) -> Self {
        Self { field }
    }
}

impl<F: ScalarField> OptimalityProblem for Stationarity<F> {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Root
    }
    fn dim_z(&self) -> usize {
        self.field.dim_z()
    }
    fn dim_a(&self) -> usize {
        self.field.dim_a()
    }
    fn condition(&self, z: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        Ok(grad_z(&self.field, z, a)?.values)
    }
    fn jacobian_z(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>> {
        Ok(hessian_zz(&self.field, z, a)?.matrix)
    }
    fn jacobian_a(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>> {
        Ok(mixed_jacobian_za(&self.field, z, a)?.matrix.transpose())
    }
    fn objective(&self, z: &[f64], a: &[f64]) -> Option<f64> {
        Some(self.field.value(z, a))
    }
}

/// `∂_a z*` at a solution point.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitJacobian {
    /// `dim_a x dim_z`; row `k` is the sensitivity of `z*` to `a_k`.
    pub matrix: DMatrix<f64>,
    /// `||f(z0, a0)||_inf` (root) or `||f(z0, a0) - z0||_inf` (fixed point).
    pub condition_norm: f64,
    pub damping: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitVjp {
    /// `vᵀ ∂_a z*`, length `dim_a`.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub condition_norm: f64,
    pub damping: f64,
    pub warnings: Vec<String>,
}

fn condition_norm<P: OptimalityProblem + ?Sized>(problem: &P, z: &[f64], a: &[f64]) -> Result<f64> {
    let f = problem.condition(z, a)?;
    check_len("optimality condition", problem.dim_z(), f.len())?;
    Ok(match problem.kind() {
        ProblemKind::Root => max_norm(&f),
        ProblemKind::FixedPoint => f
            .iter()
            .zip(z)
            .fold(0.0f64, |m, (fi, zi)| m.max((fi - zi).abs())),
    })
}

// Damped system matrix M, B, the solution-condition norm and warnings.
struct Prepared {
    m: DMatrix<f64>,
    b: DMatrix<f64>,
    cond: f64,
    warnings: Vec<String>,
}

fn prepare<P: OptimalityProblem + ?Sized>(
    problem: &P,
    z0: &[f64],
    a0: &[f64],
    cfg: &LinearSolveConfig,
) -> Result<Prepared> {
    cfg.validate()?;
    check_len("solution point z", problem.dim_z(), z0.len())?;
    check_len("solution point a", problem.dim_a(), a0.len())?;
    let cond = condition_norm(problem, z0, a0)?;
    let mut warnings = Vec::new();
    if cond > 10.0 * cfg.condition_tol {
        warnings.push(format!(
            "solution condition residual {cond:.3e} exceeds 10x tolerance {:.1e}; implicit gradient may be biased",
            cfg.condition_tol
        ));
    }
    let d = problem.dim_z();
    let a = problem.jacobian_z(z0, a0)?;
    let b = problem.jacobian_a(z0, a0)?;
    if a.shape() != (d, d) || b.shape() != (d, problem.dim_a()) {
        return Err(Error::domain("problem Jacobians have the wrong shape"));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let m = match problem.kind() {
        ProblemKind::Root => a + &eye * cfg.damping,
        ProblemKind::FixedPoint => &eye - a + &eye * cfg.damping,
    };
    Ok(Prepared {
        m,
        b,
        cond,
        warnings,
    })
}

fn sign(kind: ProblemKind) -> f64 {
    match kind {
        ProblemKind::Root => -1.0,
        ProblemKind::FixedPoint => 1.0,
    }
}

fn mat_apply(m: &DMatrix<f64>) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |x| (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// Full `∂_a z*`, one linear solve per column of `B`.
pub fn implicit_jacobian<P: OptimalityProblem + ?Sized>(
    problem: &P,
    z0: &[f64],
    a0: &[f64],
    cfg: &LinearSolveConfig,
) -> Result<ImplicitJacobian> {
    let Prepared {
        m,
        b,
        cond,
        warnings,
    } = prepare(problem, z0, a0, cfg)?;
    let s = sign(problem.kind());
    let mut out = DMatrix::zeros(problem.dim_a(), problem.dim_z());
    for k in 0..problem.dim_a() {
        let col: Vec<f64> = b.column(k).iter().copied().collect();
        let sol = solve_linear(mat_apply(&m), &col, cfg)?;
        for (i, v) in sol.x.into_iter().enumerate() {
            out[(k, i)] = s * v;
        }
    }
    Ok(ImplicitJacobian {
        matrix: out,
        condition_norm: cond,
        damping: cfg.damping,
        warnings,
    })
}

/// `vᵀ ∂_a z*` from a single transposed solve.
pub fn implicit_vjp<P: OptimalityProblem + ?Sized>(
    problem: &P,
    z0: &[f64],
    a0: &[f64],
    v: &[f64],
    cfg: &LinearSolveConfig,
) -> Result<ImplicitVjp> {
    check_len("cotangent", problem.dim_z(), v.len())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("cotangent must be finite"));
    }
    let Prepared {
        m,
        b,
        cond,
        warnings,
    } = prepare(problem, z0, a0, cfg)?;
    let mt = m.transpose();
    let sol = solve_linear(mat_apply(&mt), v, cfg)?;
    let s = sign(problem.kind());
    let values = (b.transpose() * DVector::from_column_slice(&sol.x))
        .iter()
        .map(|x| s * x)
        .collect();
    Ok(ImplicitVjp {
        values,
        iterations: sol.iterations,
        residual: sol.residual,
        condition_norm: cond,
        damping: cfg.damping,
        warnings,
    })
}

/// Result of running the inner solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub z: Vec<f64>,
    pub trace: OptimTrace,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.trace.converged
    }
}

/// Runs the inner solver without treating non-convergence as an error.
///
/// Root problems take steps `z <- z - lr f(z, a)`, which is gradient descent
/// when `f` is a gradient. Fixed-point problems iterate `z <- f(z, a)`.
pub fn solve_map_trace<P: OptimalityProblem + ?Sized>(
    problem: &P,
    a: &[f64],
    z_init: &[f64],
    inner: &GDConfig,
) -> Result<SolveOutcome> {
    check_len("initial z", problem.dim_z(), z_init.len())?;
    check_len("parameters a", problem.dim_a(), a.len())?;
    match problem.kind() {
        ProblemKind::Root => {
            // `minimize` evaluates the gradient before the objective at each
            // point; the objective falls back to half the squared residual.
            let last = std::cell::RefCell::new(Vec::new());
            let trace = minimize(
                |z| {
                    problem.objective(z, a).unwrap_or_else(|| {
                        0.5 * last.borrow().iter().map(|x: &f64| x * x).sum::<f64>()
                    })
                },
                |z| {
                    let f = problem
                        .condition(z, a)
                        .unwrap_or_else(|_| vec![f64::NAN; z.len()]);
                    *last.borrow_mut() = f.clone();
                    f
                },
                z_init,
                inner,
            )?;
            Ok(SolveOutcome {
                z: trace.final_point.clone(),
                trace,
            })
        }
        ProblemKind::FixedPoint => {
            inner.validate()?;
            let mut z = z_init.to_vec();
            let mut iterates = Vec::new();
            for iteration in 0..=inner.max_iter {
                let next = problem.condition(&z, a)?;
                let step = next
                    .iter()
                    .zip(&z)
                    .fold(0.0f64, |m, (n, c)| m.max((n - c).abs()));
                if !step.is_finite() {
                    return Err(Error::NonFinite {
                        iteration,
                        last_finite: z,
                    });
                }
                iterates.push(TraceStep {
                    iteration,
                    objective: step,
                    grad_norm: step,
                });
                if step <= inner.tol {
                    return Ok(SolveOutcome {
                        trace: OptimTrace {
                            iterates,
                            converged: true,
                            final_point: z.clone(),
                        },
                        z,
                    });
                }
                if iteration < inner.max_iter {
                    z = next;
                }
            }
            Ok(SolveOutcome {
                trace: OptimTrace {
                    iterates,
                    converged: false,
                    final_point: z.clone(),
                },
                z,
            })
        }
    }
}

/// Finds `z*(a)` from `z_init`; non-convergence is an error carrying the final
/// condition norm.
pub fn solve_map<P: OptimalityProblem + ?Sized>(
    problem: &P,
    a: &[f64],
    z_init: &[f64],
    inner: &GDConfig,
) -> Result<SolveOutcome> {
    let outcome = solve_map_trace(problem, a, z_init, inner)?;
    if outcome.converged() {
        Ok(outcome)
    } else {
        Err(Error::NonConvergence {
            method: "inner solver",
            iterations: outcome.trace.steps(),
            residual: outcome.trace.final_grad_norm(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Closure-backed problem for tests.
    struct Explicit<F, A, B> {
        kind: ProblemKind,
        dim_z: usize,
        dim_a: usize,
        f: F,
        jz: A,
        ja: B,
    }

    impl<F, A, B> OptimalityProblem for Explicit<F, A, B>
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64>,
        A: Fn(&[f64], &[f64]) -> DMatrix<f64>,
        B: Fn(&[f64], &[f64]) -> DMatrix<f64>,
    {
        fn kind(&self) -> ProblemKind {
            self.kind
        }
        fn dim_z(&self) -> usize {
            self.dim_z
        }
        fn dim_a(&self) -> usize {
            self.dim_a
        }
        fn condition(&self, z: &[f64], a: &[f64]) -> Result<Vec<f64>> {
            Ok((self.f)(z, a))
        }
        fn jacobian_z(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>> {
            Ok((self.jz)(z, a))
        }
        fn jacobian_a(&self, z: &[f64], a: &[f64]) -> Result<DMatrix<f64>> {
            Ok((self.ja)(z, a))
        }
    }

    fn sqrt_problem() -> impl OptimalityProblem {
        Explicit {
            kind: ProblemKind::Root,
            dim_z: 1,
            dim_a: 1,
            f: |z: &[f64], a: &[f64]| vec![z[0] * z[0] - a[0]],
            jz: |z: &[f64], _: &[f64]| DMatrix::from_element(1, 1, 2.0 * z[0]),
            ja: |_: &[f64], _: &[f64]| DMatrix::from_element(1, 1, -1.0),
        }
    }

    fn affine_fixed_point() -> impl OptimalityProblem {
        // f(z, a) = a z + 1.
        Explicit {
            kind: ProblemKind::FixedPoint,
            dim_z: 1,
            dim_a: 1,
            f: |z: &[f64], a: &[f64]| vec![a[0] * z[0] + 1.0],
            jz: |_: &[f64], a: &[f64]| DMatrix::from_element(1, 1, a[0]),
            ja: |z: &[f64], _: &[f64]| DMatrix::from_element(1, 1, z[0]),
        }
    }

    fn undamped(method: SolveMethod) -> LinearSolveConfig {
        LinearSolveConfig {
            damping: 0.0,
            neumann_terms: 200,
            ..LinearSolveConfig::with_method(method)
        }
    }

    #[test]
    fn square_root_sensitivity() {
        let p = sqrt_problem();
        let cfg = undamped(SolveMethod::Gmres);
        let j = implicit_jacobian(&p, &[2.0], &[4.0], &cfg).unwrap();
        assert!((j.matrix[(0, 0)] - 0.25).abs() < 1e-12);
        assert!(j.warnings.is_empty());
        let v = implicit_vjp(&p, &[2.0], &[4.0], &[1.0], &cfg).unwrap();
        assert!((v.values[0] - 0.25).abs() < 1e-12);
        let zero = implicit_vjp(&p, &[2.0], &[4.0], &[0.0], &cfg).unwrap();
        assert_eq!(zero.values, vec![0.0]);
    }

    #[test]
    fn fixed_point_geometric_series() {
        let p = affine_fixed_point();
        for method in [
            SolveMethod::Direct,
            SolveMethod::Gmres,
            SolveMethod::Neumann,
        ] {
            let cfg = undamped(method);
            let j = implicit_jacobian(&p, &[2.0], &[0.5], &cfg).unwrap();
            assert!((j.matrix[(0, 0)] - 4.0).abs() < 1e-9, "{method:?}");
            let v = implicit_vjp(&p, &[2.0], &[0.5], &[1.0], &cfg).unwrap();
            assert!((v.values[0] - 4.0).abs() < 1e-9, "{method:?}");
        }
    }

    #[test]
    fn two_dim_linear_root() {
        let p = Explicit {
            kind: ProblemKind::Root,
            dim_z: 2,
            dim_a: 1,
            f: |z: &[f64], a: &[f64]| vec![z[0] - a[0], z[1] - 3.0 * a[0]],
            jz: |_: &[f64], _: &[f64]| DMatrix::identity(2, 2),
            ja: |_: &[f64], _: &[f64]| DMatrix::from_column_slice(2, 1, &[-1.0, -3.0]),
        };
        let j = implicit_jacobian(&p, &[0.7, 2.1], &[0.7], &undamped(SolveMethod::Cg)).unwrap();
        assert!((j.matrix[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((j.matrix[(0, 1)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn off_solution_point_warns() {
        let p = sqrt_problem();
        let j = implicit_jacobian(&p, &[2.1], &[4.0], &undamped(SolveMethod::Direct)).unwrap();
        assert_eq!(j.warnings.len(), 1);
    }

    #[test]
    fn singular_undamped_is_non_convergence() {
        let p = sqrt_problem();
        let err =
            implicit_jacobian(&p, &[0.0], &[0.0], &undamped(SolveMethod::Direct)).unwrap_err();
        assert!(err.is_non_convergence());
    }

    #[test]
    fn solve_map_cosine() {
        // E = cos(theta), f = -sin(theta).
        let p = Explicit {
            kind: ProblemKind::Root,
            dim_z: 1,
            dim_a: 0,
            f: |z: &[f64], _: &[f64]| vec![-z[0].sin()],
            jz: |z: &[f64], _: &[f64]| DMatrix::from_element(1, 1, -z[0].cos()),
            ja: |_: &[f64], _: &[f64]| DMatrix::zeros(1, 0),
        };
        let inner = GDConfig::new(0.1, 10_000, 1e-10, 0).unwrap();
        let out = solve_map(&p, &[], &[2.0], &inner).unwrap();
        assert!((out.z[0] - PI).abs() < 1e-6);
    }

    #[test]
    fn solve_map_fixed_point() {
        let p = affine_fixed_point();
        let inner = GDConfig::new(1.0, 200, 1e-12, 0).unwrap();
        let out = solve_map(&p, &[0.5], &[0.0], &inner).unwrap();
        assert!((out.z[0] - 2.0).abs() < 1e-11);
        let short = GDConfig::new(1.0, 3, 1e-12, 0).unwrap();
        assert!(solve_map(&p, &[0.5], &[0.0], &short)
            .unwrap_err()
            .is_non_convergence());
    }
}
