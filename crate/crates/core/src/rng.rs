//! Counter-based random streams.
//!
//! Every random draw in the simulator comes from a stream keyed by
//! `(master_seed, purpose, a, b)`. The key is the ChaCha8 key itself, so any
//! stream can be rebuilt from its coordinates alone: no generator state is
//! shared between environments, episodes or workers, and results do not
//! depend on the order in which streams are created or consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Per-episode stream: goal, randomized parameters, sensor and actuator noise.
    Episode = 1,
    /// Per-environment action sampling during rollouts.
    Policy = 2,
    /// Network weight initialisation.
    Init = 3,
    /// Minibatch shuffling.
    Shuffle = 4,
    /// Evaluation-world disturbances.
    Eval = 5,
    /// Synthetic system-identification noise.
    Sysid = 6,
}

/// SplitMix64 finalizer; spreads a 64-bit seed over all key bits.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the stream for the given coordinates.
pub fn stream(master_seed: u64, purpose: Purpose, a: u64, b: u64) -> Stream {
    let words = [mix(master_seed), purpose as u64, a, b];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw on `[lo, hi)`; returns `lo` exactly when `hi == lo`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Uniform draw on `[-bound, bound)`.
#[inline]
pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    uniform(rng, -bound, bound)
}
