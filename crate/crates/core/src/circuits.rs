//! Parameterized circuits and the ansatz constructors.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::statevec::{Gate, GateKind, StateVector};

/// Source of one gate angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Trainable(usize),
    Data(usize),
    Const(f64),
}

/// A gate whose angles are bound at evaluation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateTemplate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub angles: Vec<Angle>,
}

/// Ordered gate templates acting on `|0...0>`.
///
/// Trainable slots may be partitioned into contiguous groups (one per layer)
/// so per-layer penalties can be formed without knowing the ansatz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    gates: Vec<GateTemplate>,
    n_trainable: usize,
    n_data: usize,
    groups: Vec<Range<usize>>,
}

impl ParamCircuit {
    pub fn new(
        n_qubits: usize,
        gates: Vec<GateTemplate>,
        n_trainable: usize,
        n_data: usize,
        groups: Vec<Range<usize>>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::domain("circuit needs at least one qubit"));
        }
        let mut used = vec![false; n_trainable];
        for g in &gates {
            check_len("gate targets", g.kind.n_targets(), g.targets.len())?;
            check_len("gate angles", g.kind.n_angles(), g.angles.len())?;
            for (i, &t) in g.targets.iter().enumerate() {
                if t >= n_qubits || g.targets[..i].contains(&t) {
                    return Err(Error::domain(format!(
                        "invalid targets {:?} for {n_qubits} qubits",
                        g.targets
                    )));
                }
            }
            for angle in &g.angles {
                match *angle {
                    Angle::Trainable(k) if k >= n_trainable => {
                        return Err(Error::domain(format!("trainable slot {k} out of range")))
                    }
                    Angle::Trainable(k) => used[k] = true,
                    Angle::Data(k) if k >= n_data => {
                        return Err(Error::domain(format!("data slot {k} out of range")))
                    }
                    Angle::Const(c) if !c.is_finite() => {
                        return Err(Error::domain("constant angle must be finite"))
                    }
                    _ => {}
                }
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::domain(format!("trainable slot {k} is never used")));
        }
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.end < g.start || g.end > n_trainable {
                return Err(Error::domain(format!("invalid parameter group {g:?}")));
            }
            next = g.end;
        }
        Ok(Self {
            n_qubits,
            gates,
            n_trainable,
            n_data,
            groups,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    pub fn n_trainable(&self) -> usize {
        self.n_trainable
    }
    pub fn n_data(&self) -> usize {
        self.n_data
    }
    pub fn gates(&self) -> &[GateTemplate] {
        &self.gates
    }
    /// Contiguous trainable index ranges, one per layer.
    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// True when the two-term shift rule is exact for every trainable slot:
    /// each slot appears in exactly one Pauli-rotation angle.
    pub fn is_shift_exact(&self) -> bool {
        let mut count = vec![0usize; self.n_trainable];
        for g in &self.gates {
            for angle in &g.angles {
                if let Angle::Trainable(k) = angle {
                    if !g.kind.is_pauli_rotation() {
                        return false;
                    }
                    count[*k] += 1;
                }
            }
        }
        count.iter().all(|&c| c == 1)
    }

    /// Concrete gates for the given slot values.
    pub fn bind(&self, trainable: &[f64], data: &[f64]) -> Result<Vec<Gate>> {
        check_len("trainable parameters", self.n_trainable, trainable.len())?;
        check_len("data parameters", self.n_data, data.len())?;
        self.gates
            .iter()
            .map(|g| {
                let params = g
                    .angles
                    .iter()
                    .map(|a| match *a {
                        Angle::Trainable(k) => trainable[k],
                        Angle::Data(k) => data[k],
                        Angle::Const(c) => c,
                    })
                    .collect();
                Gate::new(g.kind, g.targets.clone(), params)
            })
            .collect()
    }

    /// `U(trainable, data)|0...0>`.
    pub fn evaluate_state(&self, trainable: &[f64], data: &[f64]) -> Result<StateVector> {
        check_len("trainable parameters", self.n_trainable, trainable.len())?;
        check_len("data parameters", self.n_data, data.len())?;
        if trainable.iter().chain(data).any(|v| !v.is_finite()) {
            return Err(Error::domain("gate angles must be finite"));
        }
        let mut state = StateVector::zero(self.n_qubits)?;
        let mut params = [0.0; 3];
        for g in &self.gates {
            for (p, a) in params.iter_mut().zip(&g.angles) {
                *p = match *a {
                    Angle::Trainable(k) => trainable[k],
                    Angle::Data(k) => data[k],
                    Angle::Const(c) => c,
                };
            }
            // Targets and arities were validated in `new`.
            state.apply_unchecked(g.kind, &g.targets, &params[..g.angles.len()]);
        }
        Ok(state)
    }
}

/// Incremental construction that hands out trainable slots in order.
struct Builder {
    n_qubits: usize,
    gates: Vec<GateTemplate>,
    n_trainable: usize,
    groups: Vec<Range<usize>>,
    group_start: usize,
}

impl Builder {
    fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            n_trainable: 0,
            groups: Vec::new(),
            group_start: 0,
        }
    }

    fn trainable(&mut self) -> Angle {
        self.n_trainable += 1;
        Angle::Trainable(self.n_trainable - 1)
    }

    fn push(&mut self, kind: GateKind, targets: Vec<usize>, angles: Vec<Angle>) {
        self.gates.push(GateTemplate {
            kind,
            targets,
            angles,
        });
    }

    fn ry(&mut self, q: usize) {
        let a = self.trainable();
        self.push(GateKind::RY, vec![q], vec![a]);
    }

    fn rot(&mut self, q: usize) {
        let angles = vec![self.trainable(), self.trainable(), self.trainable()];
        self.push(GateKind::Rot, vec![q], angles);
    }

    fn close_group(&mut self) {
        self.groups.push(self.group_start..self.n_trainable);
        self.group_start = self.n_trainable;
    }

    fn build(self, n_data: usize) -> Result<ParamCircuit> {
        ParamCircuit::new(
            self.n_qubits,
            self.gates,
            self.n_trainable,
            n_data,
            self.groups,
        )
    }
}

/// Layered RY + CZ circuit.
///
/// An initial RY on every qubit, then per layer: for each pair `(0,1), (2,3), ...`
/// a CZ followed by RY on both qubits, then the same for pairs `(1,2), (3,4), ...`.
/// Trainable count is `n + layers * 2 * (n - 1)`; groups are the initial
/// rotations and then one per layer.
pub fn two_design_ansatz(n: usize, layers: usize) -> Result<ParamCircuit> {
    if n < 2 || layers < 1 {
        return Err(Error::domain(format!(
            "two-design ansatz needs n >= 2 and layers >= 1 (got n={n}, layers={layers})"
        )));
    }
    let mut b = Builder::new(n);
    for q in 0..n {
        b.ry(q);
    }
    b.close_group();
    for _ in 0..layers {
        for offset in [0, 1] {
            let mut q = offset;
            while q + 1 < n {
                b.push(GateKind::CZ, vec![q, q + 1], vec![]);
                b.ry(q);
                b.ry(q + 1);
                q += 2;
            }
        }
        b.close_group();
    }
    b.build(0)
}

/// Single-qubit data re-uploading classifier.
///
/// `U(z_L) U(x) ... U(z_0) U(x) |0>` where `U(x) = Rot(alpha, beta, 0)` loads the
/// two data slots and each `U(z_l)` is a fully trainable `Rot`. There are
/// `layers + 1` weight blocks, each its own group.
pub fn reuploading_circuit(layers: usize) -> Result<ParamCircuit> {
    if layers < 1 {
        return Err(Error::domain(
            "re-uploading circuit needs at least one layer",
        ));
    }
    let mut b = Builder::new(1);
    for _ in 0..=layers {
        b.push(
            GateKind::Rot,
            vec![0],
            vec![Angle::Data(0), Angle::Data(1), Angle::Const(0.0)],
        );
        b.rot(0);
        b.close_group();
    }
    b.build(2)
}

/// One trainable `Rot` per qubit, no entangling gates.
pub fn product_ansatz(n: usize) -> Result<ParamCircuit> {
    if n < 1 {
        return Err(Error::domain("product ansatz needs at least one qubit"));
    }
    let mut b = Builder::new(n);
    for q in 0..n {
        b.rot(q);
    }
    b.close_group();
    b.build(0)
}

/// Per layer: `Rot` on every qubit, then a CNOT ring `i -> i+1 (mod n)`.
///
/// The wrap-around CNOT is omitted for two qubits.
pub fn entangler_ansatz(n: usize, layers: usize) -> Result<ParamCircuit> {
    if n < 2 || layers < 1 {
        return Err(Error::domain(format!(
            "entangler ansatz needs n >= 2 and layers >= 1 (got n={n}, layers={layers})"
        )));
    }
    let mut b = Builder::new(n);
    for _ in 0..layers {
        for q in 0..n {
            b.rot(q);
        }
        let links = if n == 2 { 1 } else { n };
        for i in 0..links {
            b.push(GateKind::CNOT, vec![i, (i + 1) % n], vec![]);
        }
        b.close_group();
    }
    b.build(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn two_design_small() {
        let c = two_design_ansatz(2, 1).unwrap();
        let kinds: Vec<_> = c.gates().iter().map(|g| g.kind).collect();
        assert_eq!(
            kinds,
            vec![
                GateKind::RY,
                GateKind::RY,
                GateKind::CZ,
                GateKind::RY,
                GateKind::RY
            ]
        );
        assert_eq!(c.n_trainable(), 4);
        assert!(c.is_shift_exact());
        for (n, l) in [(3, 2), (5, 4), (5, 5), (4, 3)] {
            assert_eq!(
                two_design_ansatz(n, l).unwrap().n_trainable(),
                n + l * 2 * (n - 1)
            );
        }
        assert_eq!(two_design_ansatz(5, 5).unwrap().groups().len(), 6);
        assert!(two_design_ansatz(1, 1).is_err());
        assert!(two_design_ansatz(3, 0).is_err());
    }

    #[test]
    fn two_design_zero_angles_is_identity() {
        let c = two_design_ansatz(4, 2).unwrap();
        let s = c.evaluate_state(&vec![0.0; c.n_trainable()], &[]).unwrap();
        assert!((s.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reuploading_layout() {
        let c = reuploading_circuit(5).unwrap();
        assert_eq!(c.n_trainable(), 18);
        assert_eq!(c.groups().len(), 6);
        assert!(c.groups().iter().all(|g| g.len() == 3));
        assert_eq!(c.n_data(), 2);
        assert!(c.is_shift_exact());
        let s = c.evaluate_state(&[0.0; 18], &[0.0, 0.0]).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        assert!(reuploading_circuit(0).is_err());
    }

    #[test]
    fn reuploading_matches_matrix_chain() {
        let c = reuploading_circuit(1).unwrap();
        let z = [0.3, -0.8, 1.7, 2.2, 0.4, -1.3];
        let x = [0.9, -2.1];
        let data = Gate::rot(0, x[0], x[1], 0.0).single_qubit_matrix().unwrap();
        let w0 = Gate::rot(0, z[0], z[1], z[2])
            .single_qubit_matrix()
            .unwrap();
        let w1 = Gate::rot(0, z[3], z[4], z[5])
            .single_qubit_matrix()
            .unwrap();
        // Column 0 of W1 D W0 D.
        let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for m in [&data, &w0, &data, &w1] {
            v = [
                m[0][0] * v[0] + m[0][1] * v[1],
                m[1][0] * v[0] + m[1][1] * v[1],
            ];
        }
        let s = c.evaluate_state(&z, &x).unwrap();
        assert!((s.amplitudes()[0] - v[0]).norm() < 1e-12);
        assert!((s.amplitudes()[1] - v[1]).norm() < 1e-12);
    }

    #[test]
    fn product_ansatz_layout() {
        let c = product_ansatz(2).unwrap();
        assert_eq!(c.n_trainable(), 6);
        assert!(c.gates().iter().all(|g| g.kind == GateKind::Rot));
        let s = c.evaluate_state(&[0.0; 6], &[]).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        let one = product_ansatz(1)
            .unwrap()
            .evaluate_state(&[0.0, PI, 0.0], &[])
            .unwrap();
        assert!((one.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entangler_layout_and_bell() {
        assert_eq!(entangler_ansatz(2, 1).unwrap().n_trainable(), 6);
        assert_eq!(entangler_ansatz(2, 2).unwrap().n_trainable(), 12);
        let cnots = |n| {
            entangler_ansatz(n, 1)
                .unwrap()
                .gates()
                .iter()
                .filter(|g| g.kind == GateKind::CNOT)
                .count()
        };
        assert_eq!(cnots(2), 1);
        assert_eq!(cnots(3), 3);
        let c = entangler_ansatz(2, 1).unwrap();
        let s = c.evaluate_state(&[0.0; 6], &[]).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        // RY(pi/2) on qubit 0 then CNOT gives (|00> + |11>)/sqrt(2).
        let bell = c
            .evaluate_state(&[0.0, PI / 2.0, 0.0, 0.0, 0.0, 0.0], &[])
            .unwrap();
        let amps = bell.amplitudes();
        assert!((amps[0] - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((amps[3] - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn evaluate_checks_lengths() {
        let c = product_ansatz(2).unwrap();
        assert!(c.evaluate_state(&[0.0; 5], &[]).is_err());
        assert!(c.evaluate_state(&[0.0; 6], &[1.0]).is_err());
    }

    #[test]
    #[allow(clippy::single_range_in_vec_init)]
    fn construction_validates_slots() {
        let g = GateTemplate {
            kind: GateKind::RY,
            targets: vec![0],
            angles: vec![Angle::Trainable(1)],
        };
        assert!(ParamCircuit::new(1, vec![g.clone()], 1, 0, vec![]).is_err());
        assert!(ParamCircuit::new(1, vec![g.clone()], 3, 0, vec![]).is_err());
        let ok = ParamCircuit::new(1, vec![g.clone()], 2, 0, vec![]);
        assert!(ok.is_err(), "slot 0 unused");
        let shared = GateTemplate {
            kind: GateKind::RY,
            targets: vec![0],
            angles: vec![Angle::Trainable(0)],
        };
        let c = ParamCircuit::new(1, vec![shared.clone(), shared], 1, 0, vec![0..1]).unwrap();
        assert!(!c.is_shift_exact());
    }
}
