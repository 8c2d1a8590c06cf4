//! Seed derivation helpers. Every stochastic component gets its own ChaCha
//! stream derived from a root seed and a stream label, so adding draws in one
//! place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with an index into an independent child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_for(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, index))
}

/// Stream labels used across the crate.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const RESERVOIR: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const EXPLORE: u64 = 6;
    pub const INSTANCES: u64 = 7;
    pub const EVAL_INSTANCES: u64 = 8;
    pub const TIE_BREAK: u64 = 9;
}
