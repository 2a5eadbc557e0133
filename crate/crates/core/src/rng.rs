//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed from a user seed plus a purpose tag, so streams never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng(seed: u64, tag: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

pub(crate) mod tags {
    pub const SPLIT: u64 = 1;
    pub const KFOLD: u64 = 2;
    pub const SUBSAMPLE: u64 = 3;
    pub const MERGE: u64 = 4;
    pub const MLP_INIT: u64 = 5;
    pub const MLP_SHUFFLE: u64 = 6;
    pub const SEARCH: u64 = 7;
    pub const SYNTH: u64 = 8;
    pub const VALIDATION: u64 = 9;
    pub const RECORDS: u64 = 10;
}
