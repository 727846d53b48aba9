mod common;

use std::f64::consts::PI;

use implicit_vqa::circuits::two_design_ansatz;
use implicit_vqa::diff::{energy, fd_grad, grad_z, ScalarField};
use implicit_vqa::experiments::{circles, linspace, HyperParametrization, CIRCLE_RADIUS_SQ};
use implicit_vqa::implicit::{
    implicit_jacobian, implicit_vjp, solve_linear, LinearSolveConfig, OptimalityProblem,
    ProblemKind, SolveMethod,
};
use implicit_vqa::observables::{build_spin_chain, PauliString, PauliSum};
use implicit_vqa::oracle::entanglement_brute;
use implicit_vqa::statevec::{Gate, StateVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    let angle = -PI..PI;
    (0..7usize, 0..n, 0..n, angle.clone(), angle.clone(), angle).prop_map(
        move |(k, q, r, t1, t2, t3)| {
            let other = if r == q { (q + 1) % n } else { r };
            match k {
                0 => Gate::rx(q, t1),
                1 => Gate::ry(q, t1),
                2 => Gate::rz(q, t1),
                3 => Gate::rot(q, t1, t2, t3),
                4 => Gate::h(q),
                5 if n > 1 => Gate::cnot(q, other),
                _ if n > 1 => Gate::cz(q, other),
                _ => Gate::h(q),
            }
        },
    )
}

fn circuit_strategy() -> impl Strategy<Value = (usize, Vec<Gate>)> {
    (1..=4usize).prop_flat_map(|n| (Just(n), prop::collection::vec(gate_strategy(n), 0..20)))
}

fn pauli_label(n: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), n)
        .prop_map(|v| v.into_iter().collect())
}

fn spd(n: usize, seed: u64) -> DMatrix<f64> {
    let v = common::uniform(n * n, 1.0, seed);
    let m = DMatrix::from_vec(n, n, v);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.5
}

/// `f(z, a) = A z + B a` with fixed matrices.
struct Linear {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl OptimalityProblem for Linear {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Root
    }
    fn dim_z(&self) -> usize {
        self.a.nrows()
    }
    fn dim_a(&self) -> usize {
        self.b.ncols()
    }
    fn condition(&self, z: &[f64], a: &[f64]) -> implicit_vqa::Result<Vec<f64>> {
        let f = &self.a * DVector::from_column_slice(z) + &self.b * DVector::from_column_slice(a);
        Ok(f.as_slice().to_vec())
    }
    fn jacobian_z(&self, _: &[f64], _: &[f64]) -> implicit_vqa::Result<DMatrix<f64>> {
        Ok(self.a.clone())
    }
    fn jacobian_a(&self, _: &[f64], _: &[f64]) -> implicit_vqa::Result<DMatrix<f64>> {
        Ok(self.b.clone())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm((n, gates) in circuit_strategy()) {
        let s = StateVector::zero(n).unwrap().apply_all(&gates).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_undoes_circuit((n, gates) in circuit_strategy()) {
        let start = StateVector::basis(n, (1 << n) - 1).unwrap().apply(&Gate::h(0)).unwrap();
        let forward = start.apply_all(&gates).unwrap();
        let inverses: Vec<Gate> = gates.iter().rev().map(Gate::inverse).collect();
        let back = forward.apply_all(&inverses).unwrap();
        prop_assert!((back.overlap_sq(&start).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pauli_expectation_is_bounded(
        ((n, gates), label) in circuit_strategy().prop_flat_map(|(n, g)| (Just((n, g)), pauli_label(n))),
        c in -3.0..3.0f64,
    ) {
        let s = StateVector::zero(n).unwrap().apply_all(&gates).unwrap();
        let obs = PauliSum::from_terms(n, vec![PauliString::parse(c, &label).unwrap()]).unwrap();
        let e = s.expectation(&obs).unwrap();
        prop_assert!(e.abs() <= c.abs() + 1e-12);
        let doubled = s.expectation(&obs.scaled(2.0)).unwrap();
        prop_assert!((doubled - 2.0 * e).abs() < 1e-12);
    }

    #[test]
    fn shift_gradient_matches_fd(seed in 0u64..1000, a in -1.0..1.0f64) {
        let field = energy(two_design_ansatz(2, 1).unwrap(), build_spin_chain(2, 1.0, 1e-3).unwrap()).unwrap();
        let z = common::uniform(field.dim_z(), PI, seed);
        let g = grad_z(&field, &z, &[a]).unwrap().values;
        let fd = fd_grad(|y| field.value(y, &[a]), &z, 1e-5).unwrap();
        for (x, y) in g.iter().zip(&fd) {
            prop_assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn entanglement_in_unit_interval(v in prop::collection::vec(-1.0..1.0f64, 8)) {
        let amps: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        prop_assume!(amps.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
        let s = StateVector::from_amplitudes(amps).unwrap();
        let e = entanglement_brute(&s, 2, 0).unwrap().value;
        prop_assert!((-1e-12..=0.5 + 1e-9).contains(&e));
    }

    #[test]
    fn product_states_have_zero_entanglement(v in prop::collection::vec(-1.0..1.0f64, 8)) {
        let q = |w: &[f64]| StateVector::from_amplitudes(vec![Complex64::new(w[0], w[1]), Complex64::new(w[2], w[3])]);
        let (Ok(a), Ok(b)) = (q(&v[..4]), q(&v[4..])) else { return Ok(()) };
        let e = entanglement_brute(&a.tensor(&b).unwrap(), 2, 0).unwrap().value;
        prop_assert!(e.abs() < 1e-9);
    }

    #[test]
    fn vjp_is_linear_and_matches_jacobian(
        seed in 0u64..500,
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
    ) {
        let (dz, da) = (4, 3);
        let p = Linear {
            a: spd(dz, seed),
            b: DMatrix::from_vec(dz, da, common::uniform(dz * da, 1.0, seed + 1)),
        };
        let a = common::uniform(da, 1.0, seed + 3);
        // Put (z, a) on the solution set by solving for z.
        let rhs = -(&p.b * DVector::from_column_slice(&a));
        let z0 = p.a.clone().lu().solve(&rhs).unwrap();
        let z0 = z0.as_slice();
        let cfg = LinearSolveConfig { damping: 0.0, ..LinearSolveConfig::default() };
        let v1 = common::uniform(dz, 1.0, seed + 4);
        let v2 = common::uniform(dz, 1.0, seed + 5);
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| alpha * x + beta * y).collect();
        let g1 = implicit_vjp(&p, z0, &a, &v1, &cfg).unwrap().values;
        let g2 = implicit_vjp(&p, z0, &a, &v2, &cfg).unwrap().values;
        let gm = implicit_vjp(&p, z0, &a, &mix, &cfg).unwrap().values;
        let jac = implicit_jacobian(&p, z0, &a, &cfg).unwrap().matrix;
        let jv = &jac * DVector::from_column_slice(&v1);
        for k in 0..da {
            prop_assert!((gm[k] - alpha * g1[k] - beta * g2[k]).abs() < 1e-8);
            prop_assert!((g1[k] - jv[k]).abs() < 1e-8);
        }
        // Exact answer: dz/da = -A^{-1} B.
        let exact = -(p.a.clone().try_inverse().unwrap() * &p.b);
        prop_assert!((jac.transpose() - exact).amax() < 1e-8);
    }

    #[test]
    fn solvers_agree_on_spd_systems(seed in 0u64..500, n in 1usize..12) {
        let m = spd(n, seed);
        let b = common::uniform(n, 1.0, seed + 9);
        let apply = |x: &[f64]| (&m * DVector::from_column_slice(x)).as_slice().to_vec();
        let direct = solve_linear(apply, &b, &LinearSolveConfig::with_method(SolveMethod::Direct)).unwrap().x;
        for method in [SolveMethod::Cg, SolveMethod::Gmres] {
            let x = solve_linear(apply, &b, &LinearSolveConfig::with_method(method)).unwrap().x;
            for (p, q) in x.iter().zip(&direct) {
                prop_assert!((p - q).abs() < 1e-7, "{method:?}");
            }
        }
    }

    #[test]
    fn linspace_is_even(lo in -5.0..5.0f64, width in 0.1..5.0f64, steps in 2usize..50) {
        let g = linspace(lo, lo + width, steps);
        prop_assert_eq!(g.len(), steps);
        prop_assert_eq!(g[0], lo);
        prop_assert!((g[steps - 1] - (lo + width)).abs() < 1e-12);
        let dx = width / (steps - 1) as f64;
        for w in g.windows(2) {
            prop_assert!((w[1] - w[0] - dx).abs() < 1e-12);
        }
    }

    #[test]
    fn parametrizations_round_trip(a in 1e-6..10.0f64) {
        for p in [HyperParametrization::Linear, HyperParametrization::Log] {
            let h = p.from_weight(a);
            prop_assert!((p.weight(h) - a).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn circles_labels_follow_radius(seed in 0u64..1000, n_train in 0usize..30, n_val in 0usize..30) {
        let (train, val) = circles(n_train, n_val, seed);
        prop_assert_eq!(train.len(), n_train);
        prop_assert_eq!(val.len(), n_val);
        for d in [&train, &val] {
            for (x, &y) in d.features.iter().zip(&d.labels) {
                prop_assert!(x[0].abs() <= 1.0 && x[1].abs() <= 1.0);
                prop_assert_eq!(y == 1, x[0] * x[0] + x[1] * x[1] < CIRCLE_RADIUS_SQ);
            }
        }
    }
}
