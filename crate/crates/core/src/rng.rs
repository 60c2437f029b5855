//! Seeding for reproducible, schedule-independent random streams.
//!
//! Every random stream in the crate is a ChaCha8 keystream addressed by a
//! 64-bit key and a 64-bit stream id. ChaCha is counter based, so the draws
//! for a given (key, stream) do not depend on which thread produces them or
//! on how many other streams exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`, one SplitMix64 round per part.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of Monte Carlo replication `rep` at grid point `(n, t)`.
pub fn replication_seed(base_seed: u64, n: usize, t: usize, rep: usize) -> u64 {
    mix_seed(base_seed, &[n as u64, t as u64, rep as u64])
}

/// Keystream `stream` under key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
