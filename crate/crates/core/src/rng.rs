//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from a run seed plus a stream tag, so that independent consumers
//! (topology, task arrivals, exploration, replay sampling, weight init) never
//! share a stream and results are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const TOPOLOGY: u64 = 1;
    pub const TASKS: u64 = 2;
    pub const EXPLORATION: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const NETWORK_INIT: u64 = 5;
    pub const EVALUATION: u64 = 6;
    pub const BASELINE: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed, a stream tag and an index into a new 64-bit seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream.rotate_left(17)) ^ index.rotate_left(41))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
