//! Seeded random streams.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(seed, purpose, index)`, so results never depend on evaluation order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Values are arbitrary but frozen: changing one changes
/// every generated scenario.
pub mod purpose {
    pub const TEXTURE_COMMON: u64 = 0x11;
    pub const TEXTURE_LAYER: u64 = 0x12;
    pub const GROUNDWATER: u64 = 0x21;
    pub const PRECIPITATION: u64 = 0x22;
    pub const BASELINE: u64 = 0x31;
    pub const DEM_ERROR: u64 = 0x32;
    pub const TROPOSPHERE: u64 = 0x33;
    pub const MEASUREMENT: u64 = 0x34;
    pub const SPLIT: u64 = 0x41;
    pub const THIN: u64 = 0x42;
    pub const KFOLD: u64 = 0x43;
    pub const TREE: u64 = 0x51;
    pub const NET_INIT: u64 = 0x52;
    pub const NET_SHUFFLE: u64 = 0x53;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the three keys into one 64-bit stream seed.
pub fn stream_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ purpose) ^ index)
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, purpose, index))
}
