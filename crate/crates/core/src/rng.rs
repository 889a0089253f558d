//! Seed splitting.
//!
//! All randomness derives from one 64-bit seed. A stage asks for the stream
//! `(tag, index)`, which is a pure function of the seed, so work items can be
//! drawn in any order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

pub mod tags {
    pub const RANSAC: u64 = 0x5241_4e53;
    pub const PERTURB: u64 = 0x5045_5254;
    pub const YAW: u64 = 0x0059_4157;
    pub const PLACEMENT_PICK: u64 = 0x5049_434b;
    pub const DESK_MODEL: u64 = 0x4445_534b;
    pub const FIXTURE: u64 = 0x4649_5854;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the 64-bit key of stream `(tag, index)` under `seed`.
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

/// Independent generator for stream `(tag, index)` under `seed`.
pub fn substream(seed: u64, tag: u64, index: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, index))
}
