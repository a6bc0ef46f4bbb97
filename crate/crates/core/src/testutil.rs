//! Random instances for unit tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::EffectiveChannel;

pub fn small_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Channel entries with magnitudes in the range a 28 GHz link over
/// 5-40 m produces.
pub fn random_channel<R: Rng>(rng: &mut R, n: usize, m: usize) -> EffectiveChannel {
    EffectiveChannel(DMatrix::from_fn(n, m, |_, _| {
        Complex64::from_polar(rng.gen_range(2e-5..2e-4), rng.gen_range(0.0..std::f64::consts::TAU))
    }))
}

pub fn random_powers<R: Rng>(rng: &mut R, m: usize, p_max: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(0.05..1.0) * p_max).collect()
}
