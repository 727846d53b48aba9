use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Squared radius that splits `[-1, 1]^2` into two regions of equal area.
pub const CIRCLE_RADIUS_SQ: f64 = 2.0 / std::f64::consts::PI;

/// Two-feature binary classification data with labels in `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<[f64; 2]>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature vector mapped to the circuit's data angles.
    pub fn angles(&self, i: usize) -> [f64; 2] {
        let [x, y] = self.features[i];
        [x * std::f64::consts::PI, y * std::f64::consts::PI]
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Uniform points in the square; label 1 inside the circle of squared radius
/// [`CIRCLE_RADIUS_SQ`]. Returns `(train, validation)` drawn from one stream.
pub fn circles(n_train: usize, n_val: usize, seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| {
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            features.push([x, y]);
            labels.push(u8::from(x * x + y * y < CIRCLE_RADIUS_SQ));
        }
        Dataset { features, labels }
    };
    let train = draw(n_train);
    let val = draw(n_val);
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_roughly_balanced() {
        let (t1, v1) = circles(200, 100, 3);
        let (t2, v2) = circles(200, 100, 3);
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        assert_ne!(t1.features[..100], v1.features[..]);
        let frac = t1.positives() as f64 / 200.0;
        assert!((0.35..0.65).contains(&frac), "{frac}");
        for (f, &l) in t1.features.iter().zip(&t1.labels) {
            assert!(f.iter().all(|c| (-1.0..1.0).contains(c)));
            assert_eq!(l == 1, f[0] * f[0] + f[1] * f[1] < CIRCLE_RADIUS_SQ);
        }
    }
}
