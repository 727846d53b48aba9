use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chain::RotationChain;
use super::dataset::{circles, Dataset};
use super::random_angles;
use crate::circuits::{reuploading_circuit, ParamCircuit};
use crate::error::{check_len, Error, Result};
use crate::implicit::{
    implicit_vjp, solve_map_trace, LinearSolveConfig, OptimalityProblem, ProblemKind,
};
use crate::optim::GDConfig;

/// Probabilities are clamped to `[P_FLOOR, 1 - P_FLOOR]` inside the logarithms.
const P_FLOOR: f64 = 1e-12;

/// How the outer loop parametrizes the penalty weights `a_l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperParametrization {
    /// The outer variable is `a_l` itself; steps are projected onto `a_l >= 0`.
    Linear,
    /// The outer variable is `s_l` with `a_l = exp(s_l)`.
    Log,
}

impl HyperParametrization {
    /// Penalty weight for outer variable `h`.
    pub fn weight(self, h: f64) -> f64 {
        match self {
            Self::Linear => h,
            Self::Log => h.exp(),
        }
    }

    fn weight_derivative(self, h: f64) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Log => h.exp(),
        }
    }

    pub fn from_weight(self, a: f64) -> f64 {
        match self {
            Self::Linear => a,
            Self::Log => a.ln(),
        }
    }

    fn project(self, h: f64) -> f64 {
        match self {
            Self::Linear => h.max(0.0),
            Self::Log => h,
        }
    }
}

impl std::str::FromStr for HyperParametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "log" => Ok(Self::Log),
            other => Err(Error::domain(format!("unknown parametrization '{other}'"))),
        }
    }
}

/// Regularized training of the single-qubit re-uploading classifier.
///
/// The model probability of label 1 is `p = (1 + <Z>) / 2`. The training
/// loss is the mean binary cross-entropy plus `sum_l a_l ||z_l||^2` over
/// the penalized weight blocks `z_0 .. z_{L-1}`; the last block is free.
/// The problem's parameters are the outer variables `h_l` with
/// `a_l = weight(h_l)`, and the optimality condition is `∂_z L_T = 0`.
#[derive(Clone, Debug)]
pub struct ClassifierTraining {
    circuit: ParamCircuit,
    train: Dataset,
    penalized: Vec<Range<usize>>,
    chain: RotationChain,
    parametrization: HyperParametrization,
}

impl ClassifierTraining {
    pub fn new(
        layers: usize,
        train: Dataset,
        parametrization: HyperParametrization,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::domain("training set is empty"));
        }
        let circuit = reuploading_circuit(layers)?;
        let penalized = circuit.groups()[..layers].to_vec();
        let chain = RotationChain::new(&circuit)?;
        Ok(Self {
            circuit,
            train,
            penalized,
            chain,
            parametrization,
        })
    }

    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn parametrization(&self) -> HyperParametrization {
        self.parametrization
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    /// Number of hyperparameters (penalized blocks).
    pub fn n_hyper(&self) -> usize {
        self.penalized.len()
    }

    fn z_expectation(&self, z: &[f64], x: &[f64; 2]) -> f64 {
        self.chain.derivatives(z, x, false).0
    }

    /// Model probability of label 1.
    pub fn probability(&self, z: &[f64], features: [f64; 2]) -> f64 {
        let x = [
            features[0] * std::f64::consts::PI,
            features[1] * std::f64::consts::PI,
        ];
        (0.5 * (1.0 + self.z_expectation(z, &x))).clamp(P_FLOOR, 1.0 - P_FLOOR)
    }

    /// Mean binary cross-entropy on `data`.
    pub fn bce(&self, z: &[f64], data: &Dataset) -> f64 {
        let total: f64 = (0..data.len())
            .map(|i| {
                let p = (0.5 * (1.0 + self.z_expectation(z, &data.angles(i))))
                    .clamp(P_FLOOR, 1.0 - P_FLOOR);
                if data.labels[i] == 1 {
                    -p.ln()
                } else {
                    -(1.0 - p).ln()
                }
            })
            .sum();
        total / data.len() as f64
    }

    // Mean over `data` of (dL/dp) dp/dz and, if requested, the Hessian
    // (d2L/dp2) dp/dz dp/dzᵀ + (dL/dp) d2p/dz2, with p = (1 + <Z>) / 2.
    fn bce_derivatives(
        &self,
        z: &[f64],
        data: &Dataset,
        hessian: bool,
    ) -> (Vec<f64>, Option<DMatrix<f64>>) {
        let d = z.len();
        let mut g = vec![0.0; d];
        let mut h = hessian.then(|| DMatrix::zeros(d, d));
        for i in 0..data.len() {
            let (e, grad_e, hess_e) = self.chain.derivatives(z, &data.angles(i), hessian);
            let p = (0.5 * (1.0 + e)).clamp(P_FLOOR, 1.0 - P_FLOOR);
            let (d1, d2) = if data.labels[i] == 1 {
                (-1.0 / p, 1.0 / (p * p))
            } else {
                (1.0 / (1.0 - p), 1.0 / ((1.0 - p) * (1.0 - p)))
            };
            for (gj, ej) in g.iter_mut().zip(&grad_e) {
                *gj += 0.5 * d1 * ej;
            }
            if let (Some(h), Some(he)) = (h.as_mut(), hess_e) {
                for r in 0..d {
                    for c in 0..d {
                        h[(r, c)] += 0.25 * d2 * grad_e[r] * grad_e[c] + 0.5 * d1 * he[(r, c)];
                    }
                }
            }
        }
        let scale = 1.0 / data.len() as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        (g, h.map(|h| (&h + h.transpose()) * (0.5 * scale)))
    }

    /// `∂_z` of the mean cross-entropy, by the chain rule through per-sample
    /// shift-rule gradients of `<Z>`.
    pub fn bce_grad(&self, z: &[f64], data: &Dataset) -> Vec<f64> {
        self.bce_derivatives(z, data, false).0
    }

    /// `∂_z ∂_z` of the mean cross-entropy, from iterated shift rules.
    pub fn bce_hessian(&self, z: &[f64], data: &Dataset) -> DMatrix<f64> {
        self.bce_derivatives(z, data, true).1.expect("requested")
    }

    pub fn penalty(&self, z: &[f64], s: &[f64]) -> f64 {
        self.penalized
            .iter()
            .zip(s)
            .map(|(block, &hl)| {
                self.parametrization.weight(hl)
                    * z[block.clone()].iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Training loss `L_T(z, s)`.
    pub fn train_loss(&self, z: &[f64], s: &[f64]) -> f64 {
        self.bce(z, &self.train) + self.penalty(z, s)
    }
}

impl OptimalityProblem for ClassifierTraining {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Root
    }
    fn dim_z(&self) -> usize {
        self.circuit.n_trainable()
    }
    fn dim_a(&self) -> usize {
        self.penalized.len()
    }
    fn condition(&self, z: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        check_len("classifier weights", self.dim_z(), z.len())?;
        check_len("classifier hyperparameters", self.dim_a(), s.len())?;
        let mut g = self.bce_grad(z, &self.train);
        for (block, &hl) in self.penalized.iter().zip(s) {
            for i in block.clone() {
                g[i] += 2.0 * self.parametrization.weight(hl) * z[i];
            }
        }
        Ok(g)
    }
    fn jacobian_z(&self, z: &[f64], s: &[f64]) -> Result<DMatrix<f64>> {
        check_len("classifier weights", self.dim_z(), z.len())?;
        check_len("classifier hyperparameters", self.dim_a(), s.len())?;
        let mut h = self.bce_hessian(z, &self.train);
        for (block, &hl) in self.penalized.iter().zip(s) {
            for i in block.clone() {
                h[(i, i)] += 2.0 * self.parametrization.weight(hl);
            }
        }
        Ok(h)
    }
    fn jacobian_a(&self, z: &[f64], s: &[f64]) -> Result<DMatrix<f64>> {
        check_len("classifier weights", self.dim_z(), z.len())?;
        check_len("classifier hyperparameters", self.dim_a(), s.len())?;
        let mut b = DMatrix::zeros(self.dim_z(), self.dim_a());
        for (l, (block, &hl)) in self.penalized.iter().zip(s).enumerate() {
            for i in block.clone() {
                b[(i, l)] = 2.0 * self.parametrization.weight_derivative(hl) * z[i];
            }
        }
        Ok(b)
    }
    fn objective(&self, z: &[f64], s: &[f64]) -> Option<f64> {
        Some(self.train_loss(z, s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperoptConfig {
    pub layers: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub outer_steps: usize,
    pub inner: GDConfig,
    pub outer_lr: f64,
    pub solver: LinearSolveConfig,
    /// Common initial value of every penalty weight `a_l`.
    pub init_hyper: f64,
    pub parametrization: HyperParametrization,
    /// Half-width of the uniform initial-weight distribution.
    pub init_scale: f64,
    /// Points per axis of the reported decision grid.
    pub grid_resolution: usize,
}

impl Default for HyperoptConfig {
    fn default() -> Self {
        Self {
            layers: 5,
            n_train: 200,
            n_val: 100,
            outer_steps: 30,
            inner: GDConfig {
                learning_rate: 1.0,
                max_iter: 20_000,
                tol: 1e-6,
                seed: 0,
            },
            outer_lr: 0.01,
            solver: LinearSolveConfig::default(),
            init_hyper: 0.01,
            parametrization: HyperParametrization::Linear,
            init_scale: 1.0,
            grid_resolution: 21,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperoptMeta {
    pub layers: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub dataset: String,
    pub seed: u64,
    pub outer_lr: f64,
    pub init_hyper: f64,
    pub init_scale: f64,
    pub parametrization: HyperParametrization,
    pub inner: GDConfig,
    pub solver: LinearSolveConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperoptStep {
    pub step: usize,
    pub validation_loss: f64,
    pub train_loss: f64,
    /// Penalty weights `a_l = exp(s_l)` at this step.
    pub hyperparams: Vec<f64>,
    /// `∂ L_V / ∂ h_l` for the outer variables `h` at this step.
    pub hypergradient: Vec<f64>,
    pub inner_iterations: usize,
}

/// Final model probabilities on a regular grid over `[-1, 1]^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionGrid {
    pub axis: Vec<f64>,
    /// Row-major, `probabilities[i][j]` at `(x = axis[j], y = axis[i])`.
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperoptResult {
    pub metadata: HyperoptMeta,
    pub steps: Vec<HyperoptStep>,
    pub final_weights: Vec<f64>,
    pub decision_grid: DecisionGrid,
}

impl HyperoptResult {
    pub fn final_hyperparams(&self) -> &[f64] {
        self.steps.last().map_or(&[], |s| &s.hyperparams)
    }

    pub fn validation_losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.validation_loss).collect()
    }
}

/// Hypergradient descent on the per-layer penalty weights.
///
/// Every outer step solves the training problem (warm-started), evaluates
/// the validation cross-entropy and its hypergradient through one implicit
/// VJP, then takes a gradient step on the outer variables. Step `k` of the result
/// is the state after `k` updates. Inner non-convergence aborts the run.
pub fn run_hyperopt(cfg: &HyperoptConfig) -> Result<HyperoptResult> {
    cfg.inner.validate()?;
    cfg.solver.validate()?;
    if !(cfg.init_hyper > 0.0) || !cfg.init_hyper.is_finite() {
        return Err(Error::domain("initial hyperparameter must be positive"));
    }
    if !(cfg.outer_lr > 0.0) {
        return Err(Error::domain("outer learning rate must be positive"));
    }
    let (train, val) = circles(cfg.n_train, cfg.n_val, cfg.inner.seed);
    if val.is_empty() {
        return Err(Error::domain("validation set is empty"));
    }
    let problem = ClassifierTraining::new(cfg.layers, train, cfg.parametrization)?;
    let param = cfg.parametrization;
    let mut z = random_angles(
        problem.dim_z(),
        cfg.init_scale,
        cfg.inner.seed.wrapping_add(1),
    );
    let mut h = vec![param.from_weight(cfg.init_hyper); problem.n_hyper()];
    let mut solve_cfg = cfg.solver.clone();
    solve_cfg.condition_tol = cfg.inner.tol.max(solve_cfg.condition_tol);

    let mut steps = Vec::with_capacity(cfg.outer_steps + 1);
    for step in 0..=cfg.outer_steps {
        let out = solve_map_trace(&problem, &h, &z, &cfg.inner)?;
        if !out.converged() {
            return Err(Error::NonConvergence {
                method: "classifier training",
                iterations: out.trace.steps(),
                residual: out.trace.final_grad_norm(),
            });
        }
        z = out.z;
        let v = problem.bce_grad(&z, &val);
        let vjp = implicit_vjp(&problem, &z, &h, &v, &solve_cfg)?;
        steps.push(HyperoptStep {
            step,
            validation_loss: problem.bce(&z, &val),
            train_loss: problem.train_loss(&z, &h),
            hyperparams: h.iter().map(|&v| param.weight(v)).collect(),
            hypergradient: vjp.values.clone(),
            inner_iterations: out.trace.steps(),
        });
        if step < cfg.outer_steps {
            for (hl, gl) in h.iter_mut().zip(&vjp.values) {
                *hl = param.project(*hl - cfg.outer_lr * gl);
            }
        }
    }

    let axis = super::linspace(-1.0, 1.0, cfg.grid_resolution);
    let probabilities = axis
        .iter()
        .map(|&y| {
            axis.iter()
                .map(|&x| problem.probability(&z, [x, y]))
                .collect()
        })
        .collect();

    Ok(HyperoptResult {
        metadata: HyperoptMeta {
            layers: cfg.layers,
            n_train: cfg.n_train,
            n_val: cfg.n_val,
            dataset: format!(
                "circles: uniform in [-1,1]^2, label 1 iff x^2 + y^2 < 2/pi, features scaled by pi, seed {}",
                cfg.inner.seed
            ),
            seed: cfg.inner.seed,
            outer_lr: cfg.outer_lr,
            init_hyper: cfg.init_hyper,
            init_scale: cfg.init_scale,
            parametrization: param,
            inner: cfg.inner.clone(),
            solver: cfg.solver.clone(),
        },
        steps,
        final_weights: z,
        decision_grid: DecisionGrid {
            axis,
            probabilities,
        },
    })
}
