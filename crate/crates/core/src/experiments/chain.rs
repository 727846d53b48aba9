//! Shift-rule derivatives of `<Z>` for one-qubit rotation circuits.
//!
//! The values are exactly those of the two-term (and iterated) shift rule,
//! but each shifted evaluation reuses cached prefix states and
//! Heisenberg-evolved observables instead of re-simulating the circuit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuits::{Angle, ParamCircuit};
use crate::diff::SHIFT;
use crate::error::{Error, Result};
use crate::statevec::{rx_matrix, ry_matrix, rz_matrix, GateKind};

type M2 = [[Complex64; 2]; 2];
type V2 = [Complex64; 2];

#[derive(Clone, Copy, Debug)]
enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug)]
struct Elem {
    axis: Axis,
    angle: Angle,
}

// Indices into `RotationChain::shifts`.
const PLUS: usize = 0;
const MINUS: usize = 1;
const PLUS2: usize = 2;
const MINUS2: usize = 3;

/// Elementary-rotation form of a shift-exact single-qubit circuit.
#[derive(Clone, Debug)]
pub(crate) struct RotationChain {
    elems: Vec<Elem>,
    n_trainable: usize,
    // Same-axis rotations compose additively, so R(t + d) = R(t) R(d) with
    // R(d) fixed for d in {s, -s, 2s, -2s}; indexed by axis, then shift.
    shifts: [[M2; 4]; 3],
}

fn rotation(axis: Axis, theta: f64) -> M2 {
    match axis {
        Axis::X => rx_matrix(theta),
        Axis::Y => ry_matrix(theta),
        Axis::Z => rz_matrix(theta),
    }
}

fn mul_v(m: &M2, v: &V2) -> V2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

// G† O G.
fn conjugate(o: &M2, g: &M2) -> M2 {
    let mut og = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            og[i][j] = o[i][0] * g[0][j] + o[i][1] * g[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = g[0][i].conj() * og[0][j] + g[1][i].conj() * og[1][j];
        }
    }
    out
}

// Re <v| O |v>.
fn quad(v: &V2, o: &M2) -> f64 {
    let ov = mul_v(o, v);
    (v[0].conj() * ov[0] + v[1].conj() * ov[1]).re
}

impl RotationChain {
    pub(crate) fn new(circuit: &ParamCircuit) -> Result<Self> {
        if circuit.n_qubits() != 1 || !circuit.is_shift_exact() {
            return Err(Error::domain(
                "rotation chain needs a shift-exact single-qubit circuit",
            ));
        }
        let mut elems = Vec::new();
        for g in circuit.gates() {
            match g.kind {
                GateKind::RX => elems.push(Elem {
                    axis: Axis::X,
                    angle: g.angles[0],
                }),
                GateKind::RY => elems.push(Elem {
                    axis: Axis::Y,
                    angle: g.angles[0],
                }),
                GateKind::RZ => elems.push(Elem {
                    axis: Axis::Z,
                    angle: g.angles[0],
                }),
                // Rot(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi).
                GateKind::Rot => {
                    elems.push(Elem {
                        axis: Axis::Z,
                        angle: g.angles[0],
                    });
                    elems.push(Elem {
                        axis: Axis::Y,
                        angle: g.angles[1],
                    });
                    elems.push(Elem {
                        axis: Axis::Z,
                        angle: g.angles[2],
                    });
                }
                other => {
                    return Err(Error::domain(format!(
                        "rotation chain does not support {other:?}"
                    )))
                }
            }
        }
        let shifts = [Axis::X, Axis::Y, Axis::Z]
            .map(|ax| [SHIFT, -SHIFT, 2.0 * SHIFT, -2.0 * SHIFT].map(|d| rotation(ax, d)));
        Ok(Self {
            elems,
            n_trainable: circuit.n_trainable(),
            shifts,
        })
    }

    fn angles(&self, z: &[f64], x: &[f64]) -> Vec<(f64, Option<usize>)> {
        self.elems
            .iter()
            .map(|e| match e.angle {
                Angle::Trainable(k) => (z[k], Some(k)),
                Angle::Data(k) => (x[k], None),
                Angle::Const(c) => (c, None),
            })
            .collect()
    }

    /// `<Z>`, its shift-rule gradient, and optionally the iterated-shift Hessian.
    pub(crate) fn derivatives(
        &self,
        z: &[f64],
        x: &[f64],
        hessian: bool,
    ) -> (f64, Vec<f64>, Option<DMatrix<f64>>) {
        let angles = self.angles(z, x);
        let g = angles.len();
        let mats: Vec<M2> = self
            .elems
            .iter()
            .zip(&angles)
            .map(|(e, (t, _))| rotation(e.axis, *t))
            .collect();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut prefix = Vec::with_capacity(g + 1);
        prefix.push([one, zero]);
        for m in &mats {
            let next = mul_v(m, prefix.last().expect("non-empty"));
            prefix.push(next);
        }
        // obs[k] is Z pulled back through gates k+1..g-1.
        let mut obs = vec![[[one, zero], [zero, -one]]; g];
        for k in (0..g.saturating_sub(1)).rev() {
            obs[k] = conjugate(&obs[k + 1], &mats[k + 1]);
        }
        let value = quad(&prefix[g], &[[one, zero], [zero, -one]]);
        let shifted = |k: usize, which: usize, v: &V2| -> V2 {
            let r = &self.shifts[self.elems[k].axis as usize][which];
            mul_v(&mats[k], &mul_v(r, v))
        };

        let mut grad = vec![0.0; self.n_trainable];
        for k in 0..g {
            if let Some(slot) = angles[k].1 {
                let plus = quad(&shifted(k, PLUS, &prefix[k]), &obs[k]);
                let minus = quad(&shifted(k, MINUS, &prefix[k]), &obs[k]);
                grad[slot] = 0.5 * (plus - minus);
            }
        }
        if !hessian {
            return (value, grad, None);
        }

        let mut h = DMatrix::zeros(self.n_trainable, self.n_trainable);
        for i in 0..g {
            let Some(si) = angles[i].1 else { continue };
            let plus = quad(&shifted(i, PLUS2, &prefix[i]), &obs[i]);
            let minus = quad(&shifted(i, MINUS2, &prefix[i]), &obs[i]);
            h[(si, si)] = 0.25 * (plus - 2.0 * value + minus);
            let mut w = [shifted(i, PLUS, &prefix[i]), shifted(i, MINUS, &prefix[i])];
            for j in i + 1..g {
                if let Some(sj) = angles[j].1 {
                    let mut acc = 0.0;
                    for (wi, sign_i) in w.iter().zip([1.0, -1.0]) {
                        for (which, sign_j) in [(PLUS, 1.0), (MINUS, -1.0)] {
                            acc += sign_i * sign_j * quad(&shifted(j, which, wi), &obs[j]);
                        }
                    }
                    h[(si, sj)] = 0.25 * acc;
                    h[(sj, si)] = 0.25 * acc;
                }
                for wi in w.iter_mut() {
                    *wi = mul_v(&mats[j], wi);
                }
            }
        }
        (value, grad, Some(h))
    }
}
