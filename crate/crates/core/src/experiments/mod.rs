//! End-to-end pipelines: variational susceptibility, hyperparameter
//! optimization of a re-uploading classifier, and entanglement maximization.
//!
//! Each pipeline is deterministic for a fixed configuration and seed, and its
//! result can be written as JSON or CSV with [`emit_results`].

mod chain;
mod dataset;
mod emit;
mod entanglement;
mod hyperopt;
mod susceptibility;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dataset::{circles, Dataset, CIRCLE_RADIUS_SQ};
pub use emit::{emit_results, Emit, OutputFormat, SCHEMA_VERSION};
pub use entanglement::{
    bell_overlap, run_entanglement, EntanglementConfig, EntanglementInit, EntanglementMeta,
    EntanglementResult, EntanglementStep, ENTANGLEMENT_FLOOR,
};
pub use hyperopt::{
    run_hyperopt, ClassifierTraining, DecisionGrid, HyperParametrization, HyperoptConfig,
    HyperoptMeta, HyperoptResult, HyperoptStep,
};
pub use susceptibility::{
    linspace, run_susceptibility, SusceptibilityConfig, SusceptibilityMeta, SusceptibilityPoint,
    SusceptibilityResult,
};

/// Seeded uniform angles in `[-scale, scale)`.
pub(crate) fn random_angles(len: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            if scale > 0.0 {
                rng.random_range(-scale..scale)
            } else {
                0.0
            }
        })
        .collect()
}
