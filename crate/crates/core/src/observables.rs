//! Pauli strings, Pauli sums, and Hamiltonians affine in their parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Bit masks describing how a Pauli string permutes and signs basis states.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PauliMasks {
    /// Bits flipped by X or Y letters.
    pub flip: usize,
    /// Bits picking up a `(-1)^bit` sign from Y or Z letters.
    pub phase: usize,
    pub n_y: u32,
}

/// `coefficient * P_0 ⊗ P_1 ⊗ ...`, letter `k` acting on qubit `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    coefficient: f64,
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(coefficient: f64, letters: Vec<Pauli>) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::domain("Pauli coefficient must be finite"));
        }
        if letters.is_empty() {
            return Err(Error::domain("Pauli string needs at least one qubit"));
        }
        Ok(Self {
            coefficient,
            letters,
        })
    }

    /// Parses a label such as `"ZZI"`.
    pub fn parse(coefficient: f64, label: &str) -> Result<Self> {
        let letters = label
            .chars()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| {
                    Error::domain(format!("invalid Pauli letter {c:?} in {label:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coefficient, letters)
    }

    /// A single non-identity letter on `qubit` of an `n`-qubit register.
    pub fn single(n: usize, qubit: usize, letter: Pauli, coefficient: f64) -> Result<Self> {
        if qubit >= n {
            return Err(Error::domain(format!("qubit {qubit} out of range for {n}")));
        }
        let mut letters = vec![Pauli::I; n];
        letters[qubit] = letter;
        Self::new(coefficient, letters)
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.as_char()).collect()
    }

    pub(crate) fn masks(&self) -> PauliMasks {
        let n = self.letters.len();
        let mut masks = PauliMasks {
            flip: 0,
            phase: 0,
            n_y: 0,
        };
        for (q, letter) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match letter {
                Pauli::I => {}
                Pauli::X => masks.flip |= bit,
                Pauli::Y => {
                    masks.flip |= bit;
                    masks.phase |= bit;
                    masks.n_y += 1;
                }
                Pauli::Z => masks.phase |= bit,
            }
        }
        masks
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}", self.coefficient, self.label())
    }
}

/// A real linear combination of Pauli strings on a fixed register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        let mut sum = Self::new(n_qubits);
        for term in terms {
            sum.push(term)?;
        }
        Ok(sum)
    }

    /// Appends a term without merging.
    pub fn push(&mut self, term: PauliString) -> Result<()> {
        check_len("Pauli sum term", self.n_qubits, term.n_qubits())?;
        self.terms.push(term);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|t| PauliString {
                    coefficient: t.coefficient * factor,
                    letters: t.letters.clone(),
                })
                .collect(),
        }
    }

    /// Adds `factor * other`, merging strings with identical letters.
    ///
    /// New strings keep their first-appearance order. A zero `factor` leaves
    /// `self` untouched.
    pub fn add_scaled(&mut self, other: &PauliSum, factor: f64) -> Result<()> {
        check_len("Pauli sum addition", self.n_qubits, other.n_qubits)?;
        if factor == 0.0 {
            return Ok(());
        }
        for term in &other.terms {
            let c = term.coefficient * factor;
            match self.terms.iter_mut().find(|t| t.letters == term.letters) {
                Some(existing) => existing.coefficient += c,
                None => self.terms.push(PauliString {
                    coefficient: c,
                    letters: term.letters.clone(),
                }),
            }
        }
        Ok(())
    }

    /// Total coefficient of the string with the given letters (0 if absent).
    pub fn coefficient_of(&self, label: &str) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.label() == label)
            .map(|t| t.coefficient)
            .sum()
    }

    /// Compares two sums term-wise, treating absent strings as zero.
    pub fn approx_eq(&self, other: &PauliSum, tol: f64) -> bool {
        if self.n_qubits != other.n_qubits {
            return false;
        }
        self.terms.iter().chain(&other.terms).all(|t| {
            let label = t.label();
            (self.coefficient_of(&label) - other.coefficient_of(&label)).abs() <= tol
        })
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `H(a) = base + sum_k a_k * couplings[k]`.
///
/// The partial derivative with respect to `a_k` is `couplings[k]` for every `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterizedHamiltonian {
    base: PauliSum,
    couplings: Vec<PauliSum>,
}

impl ParameterizedHamiltonian {
    pub fn new(base: PauliSum, couplings: Vec<PauliSum>) -> Result<Self> {
        for c in &couplings {
            check_len("coupling operator", base.n_qubits(), c.n_qubits())?;
        }
        Ok(Self { base, couplings })
    }

    pub fn n_qubits(&self) -> usize {
        self.base.n_qubits()
    }

    pub fn n_params(&self) -> usize {
        self.couplings.len()
    }

    pub fn base(&self) -> &PauliSum {
        &self.base
    }

    pub fn couplings(&self) -> &[PauliSum] {
        &self.couplings
    }

    /// `∂H/∂a_k`.
    pub fn partial(&self, k: usize) -> Result<&PauliSum> {
        self.couplings
            .get(k)
            .ok_or_else(|| Error::domain(format!("no coupling {k}")))
    }

    /// Term-wise `H0 + sum_k a_k H_k`.
    pub fn evaluate(&self, a: &[f64]) -> Result<PauliSum> {
        check_len("Hamiltonian parameters", self.couplings.len(), a.len())?;
        let mut out = self.base.clone();
        for (coupling, &ak) in self.couplings.iter().zip(a) {
            out.add_scaled(coupling, ak)?;
        }
        Ok(out)
    }
}

/// Open transverse-field chain in a longitudinal field.
///
/// `base = -sum_i Z_i Z_{i+1} - gamma sum_i X_i - delta sum_i Z_i` and a single
/// coupling `-sum_i Z_i` for the field strength `a`. Zero-weight groups are
/// omitted from `base`.
pub fn build_spin_chain(n: usize, gamma: f64, delta: f64) -> Result<ParameterizedHamiltonian> {
    if n < 2 {
        return Err(Error::domain(format!(
            "spin chain needs at least 2 sites, got {n}"
        )));
    }
    if !gamma.is_finite() || !delta.is_finite() {
        return Err(Error::domain("field strengths must be finite"));
    }
    let mut base = PauliSum::new(n);
    for i in 0..n - 1 {
        let mut letters = vec![Pauli::I; n];
        letters[i] = Pauli::Z;
        letters[i + 1] = Pauli::Z;
        base.push(PauliString::new(-1.0, letters)?)?;
    }
    if gamma != 0.0 {
        for i in 0..n {
            base.push(PauliString::single(n, i, Pauli::X, -gamma)?)?;
        }
    }
    if delta != 0.0 {
        for i in 0..n {
            base.push(PauliString::single(n, i, Pauli::Z, -delta)?)?;
        }
    }
    let mut field = PauliSum::new(n);
    for i in 0..n {
        field.push(PauliString::single(n, i, Pauli::Z, -1.0)?)?;
    }
    ParameterizedHamiltonian::new(base, vec![field])
}

/// Average magnetization `(1/n) sum_i Z_i`.
pub fn magnetization_observable(n: usize) -> Result<PauliSum> {
    if n == 0 {
        return Err(Error::domain("magnetization needs at least one site"));
    }
    let w = 1.0 / n as f64;
    let terms = (0..n)
        .map(|i| PauliString::single(n, i, Pauli::Z, w))
        .collect::<Result<Vec<_>>>()?;
    PauliSum::from_terms(n, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::StateVector;

    #[test]
    fn spin_chain_two_sites() {
        let h = build_spin_chain(2, 1.0, 0.0).unwrap();
        let base = h.base();
        assert_eq!(base.len(), 3);
        assert_eq!(base.coefficient_of("ZZ"), -1.0);
        assert_eq!(base.coefficient_of("XI"), -1.0);
        assert_eq!(base.coefficient_of("IX"), -1.0);
        let c = h.partial(0).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.coefficient_of("ZI"), -1.0);
        assert_eq!(c.coefficient_of("IZ"), -1.0);
        assert!(build_spin_chain(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn partial_is_independent_of_a() {
        let h = build_spin_chain(3, 0.7, 1e-3).unwrap();
        let d1 = h.evaluate(&[0.3]).unwrap();
        let d2 = h.evaluate(&[-2.0]).unwrap();
        // Slope between the two evaluations equals the stored coupling.
        let mut slope = d1.clone();
        slope.add_scaled(&d2, -1.0).unwrap();
        assert!(slope
            .scaled(1.0 / 2.3)
            .approx_eq(h.partial(0).unwrap(), 1e-12));
    }

    #[test]
    fn evaluate_merges_field_terms() {
        let delta = 1e-3;
        let h = build_spin_chain(3, 1.0, delta).unwrap();
        assert_eq!(h.evaluate(&[0.0]).unwrap(), *h.base());
        let e = h.evaluate(&[0.5]).unwrap();
        assert_eq!(e.len(), h.base().len());
        assert!((e.coefficient_of("ZII") - (-0.5 - delta)).abs() < 1e-15);
        let mut sum = h.evaluate(&[0.8]).unwrap();
        sum.add_scaled(&h.evaluate(&[-0.8]).unwrap(), 1.0).unwrap();
        assert!(sum.approx_eq(&h.base().scaled(2.0), 1e-12));
        assert!(h.evaluate(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn magnetization() {
        let m1 = magnetization_observable(1).unwrap();
        assert_eq!(m1.terms()[0].label(), "Z");
        assert_eq!(m1.terms()[0].coefficient(), 1.0);
        let m5 = magnetization_observable(5).unwrap();
        assert_eq!(m5.len(), 5);
        assert!(m5.terms().iter().all(|t| t.coefficient() == 0.2));
        let up = StateVector::zero(5).unwrap();
        assert!((up.expectation(&m5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_rejects_bad_letters() {
        assert!(PauliString::parse(1.0, "XQ").is_err());
        assert!(PauliString::parse(f64::NAN, "X").is_err());
        let mut s = PauliSum::new(2);
        assert!(s.push(PauliString::parse(1.0, "X").unwrap()).is_err());
    }
}
