use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::random_angles;
use crate::circuits::{entangler_ansatz, product_ansatz};
use crate::diff::{grad_a, grad_z, Negated, Overlap, ScalarField};
use crate::error::{check_len, Error, Result};
use crate::implicit::{implicit_vjp, solve_map_trace, LinearSolveConfig, Stationarity};
use crate::optim::{max_norm, GDConfig};
use crate::statevec::StateVector;

/// Entanglement values at or below this are clamped before taking the log.
pub const ENTANGLEMENT_FLOOR: f64 = 1e-12;

/// Largest overlap with one of the four Bell states.
pub fn bell_overlap(state: &StateVector) -> Result<f64> {
    check_len("Bell overlap qubits", 2, state.n_qubits())?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amps = state.amplitudes();
    let c = |i: usize| amps[i];
    let candidates = [
        (c(0) + c(3)) * r,
        (c(0) - c(3)) * r,
        (c(1) + c(2)) * r,
        (c(1) - c(2)) * r,
    ];
    Ok(candidates
        .iter()
        .map(Complex64::norm_sqr)
        .fold(0.0, f64::max))
}

/// Starting point of the entangler parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglementInit {
    /// Uniform in `[-scale, scale)` from the configured seed.
    Random {
        scale: f64,
    },
    Fixed(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementConfig {
    pub n: usize,
    pub layers: usize,
    pub outer_steps: usize,
    pub inner: GDConfig,
    pub outer_lr: f64,
    pub solver: LinearSolveConfig,
    pub init: EntanglementInit,
}

impl Default for EntanglementConfig {
    fn default() -> Self {
        Self {
            n: 2,
            layers: 1,
            outer_steps: 2000,
            inner: GDConfig {
                learning_rate: 0.5,
                max_iter: 3_000,
                tol: 1e-10,
                seed: 0,
            },
            outer_lr: 0.001,
            solver: LinearSolveConfig::default(),
            init: EntanglementInit::Random { scale: 0.25 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementMeta {
    pub n: usize,
    pub layers: usize,
    pub seed: u64,
    pub outer_lr: f64,
    pub init: EntanglementInit,
    pub inner: GDConfig,
    pub solver: LinearSolveConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementStep {
    pub step: usize,
    /// `-ln max(E, ENTANGLEMENT_FLOOR)`.
    pub loss: f64,
    /// `E(a) = 1 - max_z |<psi_z|psi_a>|^2`.
    pub measure: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    /// Max-norms of the explicit and implicit parts of `dF/da`.
    pub direct_norm: f64,
    pub implicit_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementResult {
    pub metadata: EntanglementMeta,
    pub steps: Vec<EntanglementStep>,
    pub final_params: Vec<f64>,
    /// `(re, im)` pairs of the final entangler state.
    pub final_state: Vec<[f64; 2]>,
    pub nearest_separable_overlap: f64,
    /// Only for two qubits.
    pub bell_overlap: Option<f64>,
    pub warnings: Vec<String>,
}

impl EntanglementResult {
    pub fn final_measure(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.measure)
    }
}

/// Gradient descent on `L(a) = -ln E(a)`.
///
/// The inner problem maximizes the overlap of the entangler state with a
/// product state (warm-started between outer steps). The outer gradient is
/// the total derivative `dF/da = ∂_a F + (∂_a z*)ᵀ ∂_z F` of the optimal
/// overlap `F`, divided by `E`. When `E` falls to the floor the gradient is
/// undefined; the step is skipped with a warning.
pub fn run_entanglement(cfg: &EntanglementConfig) -> Result<EntanglementResult> {
    cfg.inner.validate()?;
    cfg.solver.validate()?;
    if !(cfg.outer_lr > 0.0) {
        return Err(Error::domain("outer learning rate must be positive"));
    }
    let overlap = Overlap::new(product_ansatz(cfg.n)?, entangler_ansatz(cfg.n, cfg.layers)?)?;
    let problem = Stationarity::new(Negated(overlap));
    let overlap = &problem.field.0;
    let dim_a = overlap.dim_a();
    let mut a = match &cfg.init {
        EntanglementInit::Random { scale } => random_angles(dim_a, *scale, cfg.inner.seed),
        EntanglementInit::Fixed(v) => {
            check_len("initial entangler parameters", dim_a, v.len())?;
            v.clone()
        }
    };
    let mut z = random_angles(
        overlap.dim_z(),
        std::f64::consts::PI,
        cfg.inner.seed.wrapping_add(1),
    );
    let mut solve_cfg = cfg.solver.clone();
    solve_cfg.condition_tol = cfg.inner.tol.max(solve_cfg.condition_tol);

    let mut steps = Vec::with_capacity(cfg.outer_steps + 1);
    let mut warnings = Vec::new();
    let mut inner_failures = 0usize;
    let mut floor_hits = 0usize;
    for step in 0..=cfg.outer_steps {
        let out = solve_map_trace(&problem, &a, &z, &cfg.inner)?;
        if !out.converged() {
            inner_failures += 1;
        }
        z = out.z.clone();
        let f = overlap.value(&z, &a);
        let measure = (1.0 - f).clamp(0.0, 1.0);
        let clamped = measure <= ENTANGLEMENT_FLOOR;
        let mut record = EntanglementStep {
            step,
            loss: -measure.max(ENTANGLEMENT_FLOOR).ln(),
            measure,
            inner_iterations: out.trace.steps(),
            inner_converged: out.converged(),
            direct_norm: 0.0,
            implicit_norm: 0.0,
        };
        if step < cfg.outer_steps && clamped {
            floor_hits += 1;
        }
        if step < cfg.outer_steps && !clamped {
            let direct = grad_a(overlap, &z, &a)?.values;
            let v = grad_z(overlap, &z, &a)?.values;
            let vjp = implicit_vjp(&problem, &z, &a, &v, &solve_cfg)?;
            record.direct_norm = max_norm(&direct);
            record.implicit_norm = max_norm(&vjp.values);
            for ((ak, dk), ik) in a.iter_mut().zip(&direct).zip(&vjp.values) {
                // dL/da = -(1/E) dE/da = (1/E) dF/da.
                *ak -= cfg.outer_lr * (dk + ik) / measure;
            }
        }
        steps.push(record);
    }
    if inner_failures > 0 {
        warnings.push(format!(
            "inner solve missed its tolerance at {inner_failures} of {} steps",
            cfg.outer_steps + 1
        ));
    }
    if floor_hits > 0 {
        warnings.push(format!(
            "entanglement at or below {ENTANGLEMENT_FLOOR:e} at {floor_hits} steps; loss clamped and update skipped"
        ));
    }

    let state = overlap.a_circuit().evaluate_state(&a, &[])?;
    let bell = if cfg.n == 2 {
        Some(bell_overlap(&state)?)
    } else {
        None
    };
    Ok(EntanglementResult {
        metadata: EntanglementMeta {
            n: cfg.n,
            layers: cfg.layers,
            seed: cfg.inner.seed,
            outer_lr: cfg.outer_lr,
            init: cfg.init.clone(),
            inner: cfg.inner.clone(),
            solver: cfg.solver.clone(),
        },
        nearest_separable_overlap: overlap.value(&z, &a),
        final_state: state.amplitudes().iter().map(|c| [c.re, c.im]).collect(),
        final_params: a,
        steps,
        bell_overlap: bell,
        warnings,
    })
}
