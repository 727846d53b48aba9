//! Derivatives of circuit expectation values.
//!
//! Fields declare how they depend on `z` and `a`. Shift-compatible arguments
//! are differentiated with the two-term parameter-shift rule, affine ones by
//! exact unit differences, and anything else by central finite differences,
//! with the method reported alongside each result.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuits::ParamCircuit;
use crate::error::{check_len, Error, Result};
use crate::observables::{ParameterizedHamiltonian, PauliSum};
use crate::statevec::StateVector;

/// Shift angle of the two-term rule for `exp(-i theta P / 2)` generators.
pub const SHIFT: f64 = FRAC_PI_2;
/// Default central-difference step for first derivatives.
pub const FD_EPS_FIRST: f64 = 1e-5;
/// Default central-difference step for second derivatives.
pub const FD_EPS_SECOND: f64 = 1e-4;

/// How a field depends on one of its arguments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dependence {
    /// A trigonometric polynomial of degree one in each coordinate.
    Shift,
    /// Affine in each coordinate.
    Affine,
    /// Only assumed smooth.
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeMethod {
    ParameterShift,
    /// Unit differences of an affine function.
    AffineDifference,
    FiniteDifference,
}

impl Dependence {
    fn method(self) -> DerivativeMethod {
        match self {
            Dependence::Shift => DerivativeMethod::ParameterShift,
            Dependence::Affine => DerivativeMethod::AffineDifference,
            Dependence::Smooth => DerivativeMethod::FiniteDifference,
        }
    }
}

/// A deterministic map `(z, a) -> R`.
///
/// `value` may panic when slice lengths differ from `dim_z` / `dim_a`; the
/// functions in this module check lengths before evaluating.
pub trait ScalarField {
    fn dim_z(&self) -> usize;
    fn dim_a(&self) -> usize;
    fn value(&self, z: &[f64], a: &[f64]) -> f64;

    fn z_dependence(&self) -> Dependence {
        Dependence::Smooth
    }
    fn a_dependence(&self) -> Dependence {
        Dependence::Smooth
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn dim_z(&self) -> usize {
        (**self).dim_z()
    }
    fn dim_a(&self) -> usize {
        (**self).dim_a()
    }
    fn value(&self, z: &[f64], a: &[f64]) -> f64 {
        (**self).value(z, a)
    }
    fn z_dependence(&self) -> Dependence {
        (**self).z_dependence()
    }
    fn a_dependence(&self) -> Dependence {
        (**self).a_dependence()
    }
}

/// `E(z, a) = <psi_z| H(a) |psi_z>`.
#[derive(Clone, Debug)]
pub struct Energy {
    circuit: ParamCircuit,
    hamiltonian: ParameterizedHamiltonian,
}

/// Builds the energy field of `circuit` against `hamiltonian`.
pub fn energy(circuit: ParamCircuit, hamiltonian: ParameterizedHamiltonian) -> Result<Energy> {
    check_len(
        "energy qubit count",
        circuit.n_qubits(),
        hamiltonian.n_qubits(),
    )?;
    if circuit.n_data() != 0 {
        return Err(Error::domain("energy ansatz must not have data slots"));
    }
    Ok(Energy {
        circuit,
        hamiltonian,
    })
}

impl Energy {
    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    pub fn hamiltonian(&self) -> &ParameterizedHamiltonian {
        &self.hamiltonian
    }

    pub fn state(&self, z: &[f64]) -> Result<StateVector> {
        self.circuit.evaluate_state(z, &[])
    }

    /// `<H_k>` for each coupling at `z` (the Hellmann-Feynman slopes).
    pub fn coupling_expectations(&self, z: &[f64]) -> Result<Vec<f64>> {
        let state = self.state(z)?;
        self.hamiltonian
            .couplings()
            .iter()
            .map(|c| state.expectation(c))
            .collect()
    }
}

impl ScalarField for Energy {
    fn dim_z(&self) -> usize {
        self.circuit.n_trainable()
    }
    fn dim_a(&self) -> usize {
        self.hamiltonian.n_params()
    }
    fn value(&self, z: &[f64], a: &[f64]) -> f64 {
        let state = self.state(z).expect("energy evaluated with wrong z length");
        let mut e = state
            .expectation(self.hamiltonian.base())
            .expect("qubit counts checked at construction");
        for (c, ak) in self.hamiltonian.couplings().iter().zip(a) {
            e += ak
                * state
                    .expectation(c)
                    .expect("qubit counts checked at construction");
        }
        e
    }
    fn z_dependence(&self) -> Dependence {
        shift_or_smooth(&self.circuit)
    }
    fn a_dependence(&self) -> Dependence {
        Dependence::Affine
    }
}

/// `<psi_z| A |psi_z>` for a fixed observable; `a` is ignored.
#[derive(Clone, Debug)]
pub struct Expectation {
    circuit: ParamCircuit,
    observable: PauliSum,
    dim_a: usize,
}

impl Expectation {
    pub fn new(circuit: ParamCircuit, observable: PauliSum, dim_a: usize) -> Result<Self> {
        check_len(
            "observable qubit count",
            circuit.n_qubits(),
            observable.n_qubits(),
        )?;
        if circuit.n_data() != 0 {
            return Err(Error::domain("expectation ansatz must not have data slots"));
        }
        Ok(Self {
            circuit,
            observable,
            dim_a,
        })
    }
}

impl ScalarField for Expectation {
    fn dim_z(&self) -> usize {
        self.circuit.n_trainable()
    }
    fn dim_a(&self) -> usize {
        self.dim_a
    }
    fn value(&self, z: &[f64], _a: &[f64]) -> f64 {
        self.circuit
            .evaluate_state(z, &[])
            .and_then(|s| s.expectation(&self.observable))
            .expect("expectation evaluated with wrong z length")
    }
    fn z_dependence(&self) -> Dependence {
        shift_or_smooth(&self.circuit)
    }
    fn a_dependence(&self) -> Dependence {
        Dependence::Affine
    }
}

/// `|<psi_z | phi_a>|^2` between a `z`-circuit and an `a`-circuit.
#[derive(Clone, Debug)]
pub struct Overlap {
    z_circuit: ParamCircuit,
    a_circuit: ParamCircuit,
}

impl Overlap {
    pub fn new(z_circuit: ParamCircuit, a_circuit: ParamCircuit) -> Result<Self> {
        check_len(
            "overlap qubit count",
            z_circuit.n_qubits(),
            a_circuit.n_qubits(),
        )?;
        if z_circuit.n_data() != 0 || a_circuit.n_data() != 0 {
            return Err(Error::domain("overlap circuits must not have data slots"));
        }
        Ok(Self {
            z_circuit,
            a_circuit,
        })
    }

    pub fn z_circuit(&self) -> &ParamCircuit {
        &self.z_circuit
    }

    pub fn a_circuit(&self) -> &ParamCircuit {
        &self.a_circuit
    }
}

impl ScalarField for Overlap {
    fn dim_z(&self) -> usize {
        self.z_circuit.n_trainable()
    }
    fn dim_a(&self) -> usize {
        self.a_circuit.n_trainable()
    }
    fn value(&self, z: &[f64], a: &[f64]) -> f64 {
        let sz = self
            .z_circuit
            .evaluate_state(z, &[])
            .expect("overlap evaluated with wrong z length");
        let sa = self
            .a_circuit
            .evaluate_state(a, &[])
            .expect("overlap evaluated with wrong a length");
        sz.overlap_sq(&sa)
            .expect("qubit counts checked at construction")
    }
    fn z_dependence(&self) -> Dependence {
        shift_or_smooth(&self.z_circuit)
    }
    fn a_dependence(&self) -> Dependence {
        shift_or_smooth(&self.a_circuit)
    }
}

/// `-F`, for turning a maximization into a minimization.
#[derive(Clone, Debug)]
pub struct Negated<F>(pub F);

impl<F: ScalarField> ScalarField for Negated<F> {
    fn dim_z(&self) -> usize {
        self.0.dim_z()
    }
    fn dim_a(&self) -> usize {
        self.0.dim_a()
    }
    fn value(&self, z: &[f64], a: &[f64]) -> f64 {
        -self.0.value(z, a)
    }
    fn z_dependence(&self) -> Dependence {
        self.0.z_dependence()
    }
    fn a_dependence(&self) -> Dependence {
        self.0.a_dependence()
    }
}

fn shift_or_smooth(circuit: &ParamCircuit) -> Dependence {
    if circuit.is_shift_exact() {
        Dependence::Shift
    } else {
        Dependence::Smooth
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub method: DerivativeMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hessian {
    /// Symmetrized matrix.
    pub matrix: DMatrix<f64>,
    pub method: DerivativeMethod,
    /// Largest `|H_ij - H_ji|` before symmetrization.
    pub asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedJacobian {
    /// `dim_a x dim_z`, entry `(k, i)` is `d^2 F / da_k dz_i`.
    pub matrix: DMatrix<f64>,
    pub z_method: DerivativeMethod,
    pub a_method: DerivativeMethod,
}

// Derivative of the vector-valued `f` along coordinate `i` of `x`.
fn partial<G>(f: &G, x: &[f64], i: usize, dep: Dependence, eps: f64) -> Vec<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let (step, scale) = match dep {
        Dependence::Shift => (SHIFT, 0.5),
        Dependence::Affine => (1.0, 1.0),
        Dependence::Smooth => (eps, 0.5 / eps),
    };
    match dep {
        Dependence::Affine => {
            xp[i] += step;
        }
        _ => {
            xp[i] += step;
            xm[i] -= step;
        }
    }
    let fp = f(&xp);
    let fm = f(&xm);
    fp.iter().zip(&fm).map(|(p, m)| (p - m) * scale).collect()
}

fn gradient_with<G>(f: &G, x: &[f64], dep: Dependence, eps: f64) -> Vec<f64>
where
    G: Fn(&[f64]) -> f64,
{
    let wrapped = |y: &[f64]| vec![f(y)];
    (0..x.len())
        .map(|i| partial(&wrapped, x, i, dep, eps)[0])
        .collect()
}

/// Two-term parameter-shift gradient of a single-argument function.
pub fn shift_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    gradient_with(&f, x, Dependence::Shift, 0.0)
}

/// Iterated parameter-shift Hessian (unsymmetrized).
pub fn shift_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
    let grad = |y: &[f64]| shift_grad(&f, y);
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let col = partial(&grad, x, i, Dependence::Shift, 0.0);
        for (j, v) in col.into_iter().enumerate() {
            h[(j, i)] = v;
        }
    }
    h
}

/// Central finite-difference gradient with step `eps`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    Ok(gradient_with(&f, x, Dependence::Smooth, eps))
}

/// Central finite-difference Hessian with step `eps` (four points per entry).
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    if !(eps > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let mut y = x.to_vec();
    for i in 0..d {
        for j in i..d {
            let mut eval = |si: f64, sj: f64| {
                y.copy_from_slice(x);
                y[i] += si;
                y[j] += sj;
                f(&y)
            };
            let v = (eval(eps, eps) - eval(eps, -eps) - eval(-eps, eps) + eval(-eps, -eps))
                / (4.0 * eps * eps);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

fn check_point<F: ScalarField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Result<()> {
    check_len("field z", field.dim_z(), z.len())?;
    check_len("field a", field.dim_a(), a.len())
}

fn grad_z_values<F: ScalarField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Vec<f64> {
    gradient_with(
        &|y: &[f64]| field.value(y, a),
        z,
        field.z_dependence(),
        FD_EPS_FIRST,
    )
}

/// `∂_z F(z, a)`; parameter shift when the field allows it, else central differences.
pub fn grad_z<F: ScalarField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Result<Gradient> {
    check_point(field, z, a)?;
    Ok(Gradient {
        values: grad_z_values(field, z, a),
        method: field.z_dependence().method(),
    })
}

/// `∂_a F(z, a)`, the explicit dependence on `a` at fixed `z`.
pub fn grad_a<F: ScalarField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Result<Gradient> {
    check_point(field, z, a)?;
    let dep = field.a_dependence();
    Ok(Gradient {
        values: gradient_with(&|y: &[f64]| field.value(z, y), a, dep, FD_EPS_FIRST),
        method: dep.method(),
    })
}

/// `∂_z ∂_z F`, symmetrized.
///
/// Shift-compatible fields use the iterated two-term rule, four evaluations
/// per entry; otherwise four-point central differences with `FD_EPS_SECOND`.
pub fn hessian_zz<F: ScalarField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Result<Hessian> {
    check_point(field, z, a)?;
    let dep = field.z_dependence();
    let raw = match dep {
        Dependence::Shift => shift_hessian(|y| field.value(y, a), z),
        Dependence::Affine => DMatrix::zeros(z.len(), z.len()),
        Dependence::Smooth => fd_hessian(|y| field.value(y, a), z, FD_EPS_SECOND)?,
    };
    let asymmetry = (&raw - raw.transpose()).amax();
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(Hessian {
        matrix,
        method: dep.method(),
        asymmetry,
    })
}

/// `∂_a ∂_z F` as a `dim_a x dim_z` matrix.
///
/// For an energy field, row `k` is the shift-rule gradient of `<H_k>`.
/// Fields that are neither affine nor shift-compatible in `a` fall back to
/// central differences in `a` of the `z` gradient.
pub fn mixed_jacobian_za<F: ScalarField + ?Sized>(
    field: &F,
    z: &[f64],
    a: &[f64],
) -> Result<MixedJacobian> {
    check_point(field, z, a)?;
    let (dz, da) = (field.dim_z(), field.dim_a());
    let grad = |y: &[f64]| grad_z_values(field, z, y);
    let a_dep = field.a_dependence();
    let mut matrix = DMatrix::zeros(da, dz);
    for k in 0..da {
        let row = partial(&grad, a, k, a_dep, FD_EPS_FIRST);
        for (i, v) in row.into_iter().enumerate() {
            matrix[(k, i)] = v;
        }
    }
    Ok(MixedJacobian {
        matrix,
        z_method: field.z_dependence().method(),
        a_method: a_dep.method(),
    })
}
