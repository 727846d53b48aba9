use serde::{Deserialize, Serialize};

use super::random_angles;
use crate::circuits::two_design_ansatz;
use crate::diff::{energy, grad_z, Expectation, ScalarField};
use crate::error::{Error, Result};
use crate::implicit::{implicit_vjp, solve_map_trace, LinearSolveConfig, Stationarity};
use crate::observables::{build_spin_chain, magnetization_observable};
use crate::optim::GDConfig;
use crate::oracle::{ground_state_exact, susceptibility_exact_fd};

/// Largest chain the pipeline accepts.
pub const MAX_CHAIN: usize = 10;

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityConfig {
    pub n: usize,
    pub layers: usize,
    pub gamma: f64,
    pub delta: f64,
    pub a_grid: Vec<f64>,
    pub inner: GDConfig,
    pub solver: LinearSolveConfig,
    /// Start each grid point from the previous optimum.
    pub warm_start: bool,
    /// Half-width of the uniform initial-angle distribution.
    pub init_scale: f64,
    /// Step of the exact central difference.
    pub exact_eps: f64,
}

impl Default for SusceptibilityConfig {
    fn default() -> Self {
        Self {
            n: 5,
            layers: 5,
            gamma: 1.0,
            delta: 1e-3,
            a_grid: linspace(-1.0, 1.0, 21),
            inner: GDConfig::default(),
            solver: LinearSolveConfig::default(),
            warm_start: true,
            init_scale: std::f64::consts::PI,
            exact_eps: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityMeta {
    pub n: usize,
    pub layers: usize,
    pub gamma: f64,
    pub delta: f64,
    pub observable: String,
    pub seed: u64,
    pub damping: f64,
    pub solver: LinearSolveConfig,
    pub inner: GDConfig,
    pub warm_start: bool,
    pub init_scale: f64,
    pub exact_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityPoint {
    pub a: f64,
    /// Implicit-gradient susceptibility; absent if the linear solve failed.
    pub chi_var: Option<f64>,
    pub chi_exact: f64,
    pub energy_var: f64,
    pub energy_exact: f64,
    /// Inner solve and linear solve both met their tolerances.
    pub converged: bool,
    pub inner_iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityResult {
    pub metadata: SusceptibilityMeta,
    pub points: Vec<SusceptibilityPoint>,
}

impl SusceptibilityResult {
    pub fn a_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.a).collect()
    }

    /// Variational values, `NaN` where the solve failed.
    pub fn chi_variational(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.chi_var.unwrap_or(f64::NAN))
            .collect()
    }

    pub fn chi_exact(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.chi_exact).collect()
    }

    /// `max |chi_var - chi_exact|`, infinite if any point failed.
    pub fn max_deviation(&self) -> f64 {
        self.points.iter().fold(0.0f64, |m, p| match p.chi_var {
            Some(c) => m.max((c - p.chi_exact).abs()),
            None => f64::INFINITY,
        })
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }
}

/// Magnetization susceptibility of the spin chain along `a_grid`.
///
/// At each grid point the energy is minimized over the two-design ansatz and
/// `d<M>/da` is obtained from one implicit VJP with cotangent `∂_z <M>`. The
/// observable does not depend on `a`, so there is no direct term. Inner
/// non-convergence is recorded per point and the sweep continues.
pub fn run_susceptibility(cfg: &SusceptibilityConfig) -> Result<SusceptibilityResult> {
    if cfg.n > MAX_CHAIN {
        return Err(Error::domain(format!(
            "susceptibility pipeline supports at most {MAX_CHAIN} spins, got {}",
            cfg.n
        )));
    }
    if cfg.a_grid.iter().any(|a| !a.is_finite()) {
        return Err(Error::domain("grid values must be finite"));
    }
    cfg.inner.validate()?;
    cfg.solver.validate()?;
    let h = build_spin_chain(cfg.n, cfg.gamma, cfg.delta)?;
    let circuit = two_design_ansatz(cfg.n, cfg.layers)?;
    let magnetization = magnetization_observable(cfg.n)?;
    let observable = Expectation::new(circuit.clone(), magnetization.clone(), 1)?;
    let problem = Stationarity::new(energy(circuit, h.clone())?);
    let dim = problem.field.dim_z();
    let fresh = random_angles(dim, cfg.init_scale, cfg.inner.seed);

    let mut points = Vec::with_capacity(cfg.a_grid.len());
    let mut z_prev: Option<Vec<f64>> = None;
    for &a in &cfg.a_grid {
        let a_vec = [a];
        let mut warnings = Vec::new();
        let z_init = match (&z_prev, cfg.warm_start) {
            (Some(z), true) => z.clone(),
            _ => fresh.clone(),
        };
        let (z, inner_ok, inner_iterations) =
            match solve_map_trace(&problem, &a_vec, &z_init, &cfg.inner) {
                Ok(out) => {
                    if !out.converged() {
                        warnings.push(format!(
                            "inner solve stopped after {} steps with gradient norm {:.3e}",
                            out.trace.steps(),
                            out.trace.final_grad_norm()
                        ));
                    }
                    (out.z.clone(), out.converged(), out.trace.steps())
                }
                Err(Error::NonFinite {
                    iteration,
                    last_finite,
                }) => {
                    warnings.push(format!(
                        "inner solve hit a non-finite value at step {iteration}"
                    ));
                    (last_finite, false, iteration)
                }
                Err(e) => return Err(e),
            };

        let v = grad_z(&observable, &z, &a_vec)?.values;
        let mut solve_cfg = cfg.solver.clone();
        solve_cfg.condition_tol = cfg.inner.tol.max(solve_cfg.condition_tol);
        let chi_var = match implicit_vjp(&problem, &z, &a_vec, &v, &solve_cfg) {
            Ok(vjp) => {
                warnings.extend(vjp.warnings);
                Some(vjp.values[0])
            }
            Err(e) if e.is_non_convergence() => {
                warnings.push(format!("linear solve failed: {e}"));
                None
            }
            Err(e) => return Err(e),
        };

        let exact = susceptibility_exact_fd(&h, &magnetization, &a_vec, 0, cfg.exact_eps)?;
        warnings.extend(exact.warning);
        let energy_exact = ground_state_exact(&h, &a_vec)?.energy;

        points.push(SusceptibilityPoint {
            a,
            chi_var,
            chi_exact: exact.value,
            energy_var: problem.field.value(&z, &a_vec),
            energy_exact,
            converged: inner_ok && chi_var.is_some(),
            inner_iterations,
            warnings,
        });
        z_prev = Some(z);
    }

    Ok(SusceptibilityResult {
        metadata: SusceptibilityMeta {
            n: cfg.n,
            layers: cfg.layers,
            gamma: cfg.gamma,
            delta: cfg.delta,
            observable: "magnetization (1/n) sum_i Z_i".into(),
            seed: cfg.inner.seed,
            damping: cfg.solver.damping,
            solver: cfg.solver.clone(),
            inner: cfg.inner.clone(),
            warm_start: cfg.warm_start,
            init_scale: cfg.init_scale,
            exact_eps: cfg.exact_eps,
        },
        points,
    })
}
