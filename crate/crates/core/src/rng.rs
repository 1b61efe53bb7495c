//! Deterministic random streams.
//!
//! Every stochastic routine takes a `u64` seed. Independent sub-streams
//! (one per trial, per Monte Carlo chunk, per restart) are derived by
//! hashing `(seed, index)` with the SplitMix64 finalizer, so a trial's draws
//! never depend on which worker thread runs it.
//!
//! The generator is ChaCha8 and Gaussian variates come from the ziggurat
//! sampler in `rand_distr::StandardNormal`. Both are pinned through
//! `Cargo.lock`; changing either changes every dataset byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type LabRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th sub-stream of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Seed derived from a chain of indices, e.g. `[experiment, d_index, trial]`.
pub fn derive_seed_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &i| derive_seed(acc, i))
}

pub fn rng_from_seed(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(master: u64, index: u64) -> LabRng {
    rng_from_seed(derive_seed(master, index))
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| std_normal(rng)).collect()
}
