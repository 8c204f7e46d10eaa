//! Explicit, splittable random streams.
//!
//! Every stochastic component receives its own [`Rng`] derived from a run seed,
//! never an ambient generator, so runs are reproducible bit for bit.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from `seed` and a stream label.
pub fn stream(seed: u64, label: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Splits off a child generator, advancing `rng`.
pub fn split(rng: &mut Rng) -> Rng {
    ChaCha8Rng::from_seed(rng.random())
}

pub fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}
