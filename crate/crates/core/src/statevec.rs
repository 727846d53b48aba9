//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so on two
//! qubits the basis order is `|00>, |01>, |10>, |11>` with the left letter
//! belonging to qubit 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::observables::PauliSum;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Normalized complex amplitudes over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::domain(format!(
                "{n_qubits} qubits exceeds the simulator limit of {MAX_QUBITS}"
            )));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::domain(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Builds a state from raw amplitudes, normalizing them.
    ///
    /// The length must be a power of two and the vector must have nonzero norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::domain(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::domain("state too large"));
        }
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::domain("amplitudes must have finite nonzero norm"));
        }
        let amplitudes = amplitudes.into_iter().map(|c| c / norm).collect();
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Returns `gate` applied to this state.
    pub fn apply(&self, gate: &Gate) -> Result<Self> {
        let mut out = self.clone();
        out.apply_in_place(gate)?;
        Ok(out)
    }

    /// Applies a sequence of gates in order.
    pub fn apply_all<'a>(&self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<Self> {
        let mut out = self.clone();
        for gate in gates {
            out.apply_in_place(gate)?;
        }
        Ok(out)
    }

    pub(crate) fn apply_in_place(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate.kind, &gate.targets, &gate.params);
        Ok(())
    }

    // Targets must be distinct and in range, and `params` must match `kind`.
    pub(crate) fn apply_unchecked(&mut self, kind: GateKind, t: &[usize], params: &[f64]) {
        match kind {
            GateKind::CZ => {
                let (ma, mb) = (self.mask(t[0]), self.mask(t[1]));
                for (i, amp) in self.amplitudes.iter_mut().enumerate() {
                    if i & ma != 0 && i & mb != 0 {
                        *amp = -*amp;
                    }
                }
            }
            GateKind::CNOT => {
                let (mc, mt) = (self.mask(t[0]), self.mask(t[1]));
                for i in (0..self.amplitudes.len()).filter(|i| i & mc != 0 && i & mt == 0) {
                    self.amplitudes.swap(i, i | mt);
                }
            }
            GateKind::SWAP => {
                let (ma, mb) = (self.mask(t[0]), self.mask(t[1]));
                self.swap_bits(ma, mb, 0);
            }
            GateKind::CSWAP => {
                let (mc, ma, mb) = (self.mask(t[0]), self.mask(t[1]), self.mask(t[2]));
                self.swap_bits(ma, mb, mc);
            }
            _ => {
                let m = kind_matrix(kind, params).expect("remaining kinds act on one qubit");
                let mask = self.mask(t[0]);
                for chunk in self.amplitudes.chunks_exact_mut(2 * mask) {
                    let (lo, hi) = chunk.split_at_mut(mask);
                    for (a0, a1) in lo.iter_mut().zip(hi) {
                        let (x0, x1) = (*a0, *a1);
                        *a0 = m[0][0] * x0 + m[0][1] * x1;
                        *a1 = m[1][0] * x0 + m[1][1] * x1;
                    }
                }
            }
        }
    }

    // Exchanges the amplitudes of indices that differ by swapping bits `ma`
    // and `mb`, restricted to indices where every bit of `control` is set.
    fn swap_bits(&mut self, ma: usize, mb: usize, control: usize) {
        for i in 0..self.amplitudes.len() {
            if i & control == control && i & ma != 0 && i & mb == 0 {
                let j = (i & !ma) | mb;
                self.amplitudes.swap(i, j);
            }
        }
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_len("inner product", self.n_qubits, other.n_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`, clamped to `[0, 1]`.
    pub fn overlap_sq(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// `<psi|obs|psi>` for a real-weighted Pauli sum.
    ///
    /// Each string acts as a signed bit permutation, so the expectation is a
    /// single pass over the amplitudes per term.
    pub fn expectation(&self, obs: &PauliSum) -> Result<f64> {
        check_len("expectation", self.n_qubits, obs.n_qubits())?;
        let mut total = 0.0;
        for term in obs.terms() {
            let masks = term.masks();
            let mut acc = ZERO;
            for (x, amp) in self.amplitudes.iter().enumerate() {
                let partner = self.amplitudes[x ^ masks.flip];
                let sign = if (x & masks.phase).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                acc += partner.conj() * amp * sign;
            }
            // Factor of i per Y letter.
            let value = acc * Complex64::i().powu(masks.n_y);
            debug_assert!(
                value.im.abs() <= 1e-10 * (1.0 + value.re.abs()),
                "Pauli string expectation has imaginary residue {}",
                value.im
            );
            total += term.coefficient() * value.re;
        }
        Ok(total)
    }

    /// Tensor product `self ⊗ other`; `self` occupies the low qubit indices.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::domain("tensor product exceeds the simulator limit"));
        }
        let mut amplitudes = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    /// Probability that measuring `qubit` yields `outcome` (0 or 1).
    pub fn probability(&self, qubit: usize, outcome: u8) -> Result<f64> {
        if qubit >= self.n_qubits || outcome > 1 {
            return Err(Error::domain(format!(
                "invalid measurement of qubit {qubit} with outcome {outcome}"
            )));
        }
        let mask = self.mask(qubit);
        let want = if outcome == 1 { mask } else { 0 };
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, c)| c.norm_sqr())
            .sum())
    }
}

/// Probability of reading the ancilla as 0 in the SWAP test between `s1` and `s2`.
///
/// Simulated on `2n + 1` qubits: ancilla (qubit 0) in `|0>`, Hadamard, one
/// controlled-SWAP per qubit pair, Hadamard. The result equals
/// `(1 + |<s1|s2>|^2) / 2`.
pub fn swap_test_probability(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    check_len("swap test", s1.n_qubits(), s2.n_qubits())?;
    let n = s1.n_qubits();
    let mut state = StateVector::zero(1)?.tensor(s1)?.tensor(s2)?;
    state.apply_in_place(&Gate::h(0))?;
    for q in 0..n {
        state.apply_in_place(&Gate::cswap(0, 1 + q, 1 + n + q))?;
    }
    state.apply_in_place(&Gate::h(0))?;
    state.probability(0, 0)
}

/// Gate families supported by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    /// `RZ(omega) RY(theta) RZ(phi)`, angles stored as `[phi, theta, omega]`.
    Rot,
    CZ,
    /// Targets are `[control, target]`.
    CNOT,
    H,
    SWAP,
    /// Targets are `[control, a, b]`.
    CSWAP,
}

impl GateKind {
    pub fn n_angles(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::Rot => 3,
            _ => 0,
        }
    }

    pub fn n_targets(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::Rot | GateKind::H => 1,
            GateKind::CZ | GateKind::CNOT | GateKind::SWAP => 2,
            GateKind::CSWAP => 3,
        }
    }

    /// Every angle enters through `exp(-i angle P / 2)` for a Pauli `P`.
    pub fn is_pauli_rotation(self) -> bool {
        self.n_angles() > 0
    }
}

/// A gate with bound targets and angles (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
    params: Vec<f64>,
}

impl Gate {
    /// Checks arity; target range is checked against the register at application time.
    pub fn new(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if targets.len() != kind.n_targets() {
            return Err(Error::domain(format!(
                "{kind:?} takes {} targets, got {}",
                kind.n_targets(),
                targets.len()
            )));
        }
        if params.len() != kind.n_angles() {
            return Err(Error::domain(format!(
                "{kind:?} takes {} angles, got {}",
                kind.n_angles(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("gate angles must be finite"));
        }
        Ok(Self {
            kind,
            targets,
            params,
        })
    }

    fn raw(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Self {
        Self {
            kind,
            targets,
            params,
        }
    }

    pub fn rx(q: usize, theta: f64) -> Self {
        Self::raw(GateKind::RX, vec![q], vec![theta])
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::raw(GateKind::RY, vec![q], vec![theta])
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::raw(GateKind::RZ, vec![q], vec![theta])
    }
    pub fn rot(q: usize, phi: f64, theta: f64, omega: f64) -> Self {
        Self::raw(GateKind::Rot, vec![q], vec![phi, theta, omega])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::raw(GateKind::CZ, vec![a, b], vec![])
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::raw(GateKind::CNOT, vec![control, target], vec![])
    }
    pub fn h(q: usize) -> Self {
        Self::raw(GateKind::H, vec![q], vec![])
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::raw(GateKind::SWAP, vec![a, b], vec![])
    }
    pub fn cswap(control: usize, a: usize, b: usize) -> Self {
        Self::raw(GateKind::CSWAP, vec![control, a, b], vec![])
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// The inverse gate.
    pub fn inverse(&self) -> Self {
        let p = &self.params;
        match self.kind {
            GateKind::RX | GateKind::RY | GateKind::RZ => {
                Self::raw(self.kind, self.targets.clone(), vec![-p[0]])
            }
            GateKind::Rot => Self::rot(self.targets[0], -p[2], -p[1], -p[0]),
            _ => self.clone(),
        }
    }

    pub(crate) fn validate(&self, n_qubits: usize) -> Result<()> {
        for (i, &t) in self.targets.iter().enumerate() {
            if t >= n_qubits {
                return Err(Error::domain(format!(
                    "{:?} target {t} out of range for {n_qubits} qubits",
                    self.kind
                )));
            }
            if self.targets[..i].contains(&t) {
                return Err(Error::domain(format!(
                    "{:?} has repeated target {t}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// 2x2 unitary for single-qubit kinds, row-major.
    pub fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        kind_matrix(self.kind, &self.params)
    }
}

fn kind_matrix(kind: GateKind, p: &[f64]) -> Option<[[Complex64; 2]; 2]> {
    match kind {
        GateKind::RX => Some(rx_matrix(p[0])),
        GateKind::RY => Some(ry_matrix(p[0])),
        GateKind::RZ => Some(rz_matrix(p[0])),
        GateKind::Rot => Some(matmul2(
            &rz_matrix(p[2]),
            &matmul2(&ry_matrix(p[1]), &rz_matrix(p[0])),
        )),
        GateKind::H => {
            let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            Some([[s, s], [s, -s]])
        }
        _ => None,
    }
}

pub(crate) fn rx_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let ms = Complex64::new(0.0, -s);
    [[c, ms], [ms, c]]
}

pub(crate) fn ry_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub(crate) fn rz_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

fn matmul2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{PauliString, PauliSum};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn bell() -> StateVector {
        StateVector::zero(2)
            .unwrap()
            .apply_all(&[Gate::h(0), Gate::cnot(0, 1)])
            .unwrap()
    }

    #[test]
    fn basis_states() {
        let s = StateVector::basis(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = StateVector::basis(2, 3).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ZERO, ZERO, ONE]);
        assert!(StateVector::basis(2, 4).is_err());
    }

    #[test]
    fn ry_pi_flips() {
        let s = StateVector::zero(1)
            .unwrap()
            .apply(&Gate::ry(0, PI))
            .unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cz_phases_11() {
        let s = StateVector::basis(2, 3)
            .unwrap()
            .apply(&Gate::cz(0, 1))
            .unwrap();
        assert!(close(s.amplitudes()[3], -ONE));
    }

    #[test]
    fn bell_construction() {
        let s = bell();
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], r));
        assert!(close(s.amplitudes()[3], r));
        assert!(s.amplitudes()[1].norm() < 1e-15 && s.amplitudes()[2].norm() < 1e-15);
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        // X on qubit 0 of |00> gives |10>, index 2.
        let s = StateVector::zero(2)
            .unwrap()
            .apply(&Gate::rx(0, PI))
            .unwrap();
        assert!((s.amplitudes()[2].norm() - 1.0).abs() < 1e-15);
        let s = StateVector::basis(2, 2)
            .unwrap()
            .apply(&Gate::cnot(0, 1))
            .unwrap();
        assert!((s.amplitudes()[3].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_targets_rejected() {
        let s = StateVector::zero(2).unwrap();
        assert!(s.apply(&Gate::ry(2, 0.1)).is_err());
        assert!(s.apply(&Gate::cz(1, 1)).is_err());
        assert!(Gate::new(GateKind::Rot, vec![0], vec![0.1]).is_err());
        assert!(Gate::new(GateKind::CZ, vec![0], vec![]).is_err());
    }

    #[test]
    fn rot_matches_composition() {
        let (phi, theta, omega) = (0.3, -1.1, 2.4);
        let s0 =
            StateVector::from_amplitudes(vec![Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.7)])
                .unwrap();
        let a = s0.apply(&Gate::rot(0, phi, theta, omega)).unwrap();
        let b = s0
            .apply_all(&[Gate::rz(0, phi), Gate::ry(0, theta), Gate::rz(0, omega)])
            .unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!(close(*x, *y));
        }
    }

    #[test]
    fn expectations_of_single_qubit_states() {
        let z = PauliSum::from_terms(1, vec![PauliString::parse(1.0, "Z").unwrap()]).unwrap();
        let zero = StateVector::zero(1).unwrap();
        assert!((zero.expectation(&z).unwrap() - 1.0).abs() < 1e-15);
        let plus = zero.apply(&Gate::h(0)).unwrap();
        assert!(plus.expectation(&z).unwrap().abs() < 1e-15);
        // <+i|Y|+i> = 1 with |+i> = RX(-pi/2)|0>.
        let y = PauliSum::from_terms(1, vec![PauliString::parse(1.0, "Y").unwrap()]).unwrap();
        let plus_i = zero.apply(&Gate::rx(0, -PI / 2.0)).unwrap();
        assert!((plus_i.expectation(&y).unwrap() - 1.0).abs() < 1e-12);
        let two = StateVector::zero(2).unwrap();
        assert!(two.expectation(&z).is_err());
    }

    #[test]
    fn overlaps() {
        let b = bell();
        assert!((b.overlap_sq(&b).unwrap() - 1.0).abs() < 1e-12);
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(zero.overlap_sq(&one).unwrap(), 0.0);
        let z2 = StateVector::zero(2).unwrap();
        assert!((z2.overlap_sq(&b).unwrap() - 0.5).abs() < 1e-12);
        assert!(z2.overlap_sq(&zero).is_err());
    }

    #[test]
    fn swap_test_values() {
        let b = bell();
        let z2 = StateVector::zero(2).unwrap();
        assert!((swap_test_probability(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert!((swap_test_probability(&zero, &one).unwrap() - 0.5).abs() < 1e-12);
        assert!((swap_test_probability(&z2, &b).unwrap() - 0.75).abs() < 1e-12);
        assert!(swap_test_probability(&z2, &one).is_err());
    }

    #[test]
    fn tensor_orders_left_operand_first() {
        let one = StateVector::basis(1, 1).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        let s = one.tensor(&zero).unwrap();
        assert!((s.amplitudes()[2].norm() - 1.0).abs() < 1e-15);
        assert_eq!(s.probability(0, 1).unwrap(), 1.0);
    }
}
