//! Implicit differentiation of variational quantum algorithms.
//!
//! A dense statevector simulator, Pauli-sum observables and parameterized
//! circuits feed a small differentiation layer (parameter-shift, affine and
//! finite-difference rules). The [`implicit`] module turns those derivatives
//! into Jacobians and vector-Jacobian products of optimal solutions through
//! matrix-free linear solves, and [`experiments`] runs the three end-to-end
//! pipelines built on top of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuits;
pub mod diff;
pub mod error;
pub mod experiments;
pub mod implicit;
pub mod observables;
pub mod optim;
pub mod oracle;
pub mod statevec;

pub use error::{Error, Result};
