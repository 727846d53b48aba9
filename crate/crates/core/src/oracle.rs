//! Brute-force references: dense operators, exact ground states,
//! finite-difference susceptibilities and multi-start geometric entanglement.
//!
//! Nothing here goes through the circuit or shift-rule machinery, so these
//! values can be used to check it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::observables::{ParameterizedHamiltonian, Pauli, PauliSum};
use crate::statevec::StateVector;

/// Largest register the dense oracle will assemble.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Gap below which an eigenvector derivative is considered ill-defined.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// A `2^n x 2^n` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .all(|c| c.norm() <= tol)
    }

    /// `<psi| M |psi>`.
    pub fn quadratic_form(&self, state: &StateVector) -> Result<Complex64> {
        check_len("dense quadratic form", self.n_qubits, state.n_qubits())?;
        let psi = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok(psi.dotc(&(&self.matrix * &psi)))
    }
}

fn letter_matrix(p: Pauli) -> DMatrix<Complex64> {
    let (o, l, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Kronecker assembly of every Pauli string; qubit 0 is the leftmost factor.
pub fn dense_matrix(obs: &PauliSum, n: usize) -> Result<DenseOperator> {
    if n > MAX_DENSE_QUBITS {
        return Err(Error::domain(format!(
            "dense assembly limited to {MAX_DENSE_QUBITS} qubits, got {n}"
        )));
    }
    check_len("dense operator qubits", n, obs.n_qubits())?;
    let dim = 1usize << n;
    let mut matrix = DMatrix::zeros(dim, dim);
    for term in obs.terms() {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(term.coefficient(), 0.0));
        for &letter in term.letters() {
            m = m.kronecker(&letter_matrix(letter));
        }
        matrix += m;
    }
    Ok(DenseOperator {
        n_qubits: n,
        matrix,
    })
}

/// Sorted eigenpairs of a Hermitian operator, via the real symmetric solver
/// when the matrix has no imaginary part.
fn eigh(op: &DenseOperator) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let m = op.matrix();
    let dim = m.nrows();
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if m.iter().all(|c| c.im == 0.0) {
        let real = m.map(|c| c.re);
        let eig = SymmetricEigen::new(real);
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = order
        .iter()
        .map(|&i| vectors.column(i).iter().copied().collect())
        .collect();
    (sorted_values, sorted_vectors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// `E_1 - E_0`.
    pub gap: f64,
}

/// Lowest eigenpair of `H(a)` by dense diagonalization.
pub fn ground_state_exact(h: &ParameterizedHamiltonian, a: &[f64]) -> Result<GroundState> {
    let op = dense_matrix(&h.evaluate(a)?, h.n_qubits())?;
    let (values, mut vectors) = eigh(&op);
    let gap = if values.len() > 1 {
        values[1] - values[0]
    } else {
        f64::INFINITY
    };
    Ok(GroundState {
        energy: values[0],
        state: StateVector::from_amplitudes(vectors.swap_remove(0))?,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSusceptibility {
    pub value: f64,
    /// Smallest ground-state gap over the two stencil points.
    pub min_gap: f64,
    pub warning: Option<String>,
}

/// `d<A>/da_k` on the exact ground state by central differences.
pub fn susceptibility_exact_fd(
    h: &ParameterizedHamiltonian,
    observable: &PauliSum,
    a: &[f64],
    k: usize,
    eps: f64,
) -> Result<ExactSusceptibility> {
    check_len("susceptibility parameters", h.n_params(), a.len())?;
    if k >= a.len() {
        return Err(Error::domain(format!("parameter index {k} out of range")));
    }
    if !(eps > 0.0) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let op = dense_matrix(observable, h.n_qubits())?;
    let eval = |shift: f64| -> Result<(f64, f64)> {
        let mut ap = a.to_vec();
        ap[k] += shift;
        let gs = ground_state_exact(h, &ap)?;
        Ok((op.quadratic_form(&gs.state)?.re, gs.gap))
    };
    let (plus, gap_p) = eval(eps)?;
    let (minus, gap_m) = eval(-eps)?;
    let min_gap = gap_p.min(gap_m);
    let warning = (min_gap <= DEGENERACY_GAP).then(|| {
        format!("ground state nearly degenerate (gap {min_gap:.2e}); derivative is ill-defined")
    });
    Ok(ExactSusceptibility {
        value: (plus - minus) / (2.0 * eps),
        min_gap,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglementEstimate {
    /// `1 - max |<phi|psi>|^2` over the best product state found.
    pub value: f64,
    pub best_overlap: f64,
    /// Standard deviation of the per-restart optima.
    pub dispersion: f64,
    pub restarts: usize,
}

// Overlap <phi_0 ⊗ ... ⊗ phi_{n-1} | psi>.
fn product_overlap(sites: &[[Complex64; 2]], psi: &[Complex64]) -> Complex64 {
    let n = sites.len();
    psi.iter()
        .enumerate()
        .map(|(x, amp)| {
            let weight: Complex64 = (0..n)
                .map(|q| sites[q][(x >> (n - 1 - q)) & 1].conj())
                .product();
            weight * amp
        })
        .sum()
}

// Sweeps of exact single-site maximization: with all other sites fixed the
// best site vector is the normalized partial contraction, so |overlap| never
// decreases.
fn alternating_ascent(sites: &mut [[Complex64; 2]], psi: &[Complex64]) -> f64 {
    let n = sites.len();
    let mut best = product_overlap(sites, psi).norm_sqr();
    for _ in 0..2000 {
        for j in 0..n {
            let mut w = [Complex64::new(0.0, 0.0); 2];
            for (x, amp) in psi.iter().enumerate() {
                let weight: Complex64 = (0..n)
                    .filter(|&q| q != j)
                    .map(|q| sites[q][(x >> (n - 1 - q)) & 1].conj())
                    .product();
                w[(x >> (n - 1 - j)) & 1] += weight * amp;
            }
            let norm = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
            if norm > 0.0 {
                sites[j] = [w[0] / norm, w[1] / norm];
            }
        }
        let value = product_overlap(sites, psi).norm_sqr();
        let improved = value - best;
        best = best.max(value);
        if improved <= 1e-15 {
            break;
        }
    }
    best
}

fn bloch(theta: f64, phi: f64) -> [Complex64; 2] {
    [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

/// Geometric entanglement `1 - max_product |<phi|psi>|^2`, best effort.
///
/// A coarse grid over the six Pauli eigenstates per qubit seeds one ascent;
/// `restarts` further ascents start from random product states. The result
/// is the best overlap found, so it is an upper bound on the entanglement
/// only if the global maximum was reached.
pub fn entanglement_brute(
    state: &StateVector,
    restarts: usize,
    seed: u64,
) -> Result<EntanglementEstimate> {
    let n = state.n_qubits();
    if n == 0 || n > 4 {
        return Err(Error::domain(format!(
            "brute-force entanglement supports 1..=4 qubits, got {n}"
        )));
    }
    let psi = state.amplitudes();
    use std::f64::consts::{FRAC_PI_2, PI};
    let grid = [
        bloch(0.0, 0.0),
        bloch(PI, 0.0),
        bloch(FRAC_PI_2, 0.0),
        bloch(FRAC_PI_2, PI),
        bloch(FRAC_PI_2, FRAC_PI_2),
        bloch(FRAC_PI_2, -FRAC_PI_2),
    ];
    let mut best_grid = vec![grid[0]; n];
    let mut best_grid_value = -1.0;
    for code in 0..grid.len().pow(n as u32) {
        let mut c = code;
        let sites: Vec<_> = (0..n)
            .map(|_| {
                let s = grid[c % grid.len()];
                c /= grid.len();
                s
            })
            .collect();
        let v = product_overlap(&sites, psi).norm_sqr();
        if v > best_grid_value {
            best_grid_value = v;
            best_grid = sites;
        }
    }
    let mut results = vec![alternating_ascent(&mut best_grid, psi)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let mut sites: Vec<_> = (0..n)
            .map(|_| {
                let cos_theta: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                bloch(cos_theta.acos(), phi)
            })
            .collect();
        results.push(alternating_ascent(&mut sites, psi));
    }
    let best = results.iter().copied().fold(0.0f64, f64::max).min(1.0);
    let mean = results.iter().sum::<f64>() / results.len() as f64;
    let var = results.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / results.len() as f64;
    Ok(EntanglementEstimate {
        value: (1.0 - best).max(0.0),
        best_overlap: best,
        dispersion: var.sqrt(),
        restarts,
    })
}
