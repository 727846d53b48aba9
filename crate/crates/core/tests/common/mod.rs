#![allow(dead_code)]

use std::io::Write;

use implicit_vqa::circuits::two_design_ansatz;
use implicit_vqa::diff::{energy, Energy, Expectation};
use implicit_vqa::implicit::Stationarity;
use implicit_vqa::observables::{build_spin_chain, magnetization_observable};
use implicit_vqa::optim::GDConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints one line that survives libtest output capture.
pub fn report(label: &str, ok: bool, detail: &str) {
    let line = format!("{} {label}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn uniform(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Energy minimization on the transverse-field chain with the magnetization
/// as the observable of interest.
pub struct Chain {
    pub problem: Stationarity<Energy>,
    pub magnetization: Expectation,
}

impl Chain {
    pub fn new(n: usize, layers: usize) -> Self {
        let circuit = two_design_ansatz(n, layers).unwrap();
        let h = build_spin_chain(n, 1.0, 1e-3).unwrap();
        let m = magnetization_observable(n).unwrap();
        Chain {
            problem: Stationarity::new(energy(circuit.clone(), h).unwrap()),
            magnetization: Expectation::new(circuit, m, 1).unwrap(),
        }
    }

    pub fn dim(&self) -> usize {
        self.problem.field.circuit().n_trainable()
    }
}

pub fn tight_inner(seed: u64) -> GDConfig {
    GDConfig::new(0.05, 200_000, 1e-10, seed).unwrap()
}
