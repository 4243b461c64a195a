//! Seeded inputs shared by the criterion benches.

use pvqa_core::stats::DMatrix;
use pvqa_core::{FeatureMap, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn feature_map(h: usize, w: usize, k: usize, seed: u64) -> FeatureMap {
    let mut rng = rng(seed);
    FeatureMap::from_fn(h, w, k, |_, _, _| rng.random_range(-1.0..1.0)).expect("positive dimensions")
}

pub fn frame(h: usize, w: usize, seed: u64) -> Frame {
    let mut rng = rng(seed);
    Frame::from_fn(h, w, |_, _, _| rng.random())
}

/// `n × d` uniform samples in `[-1, 1)`.
pub fn matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}
