//! Counter-derived random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream whose key is a
//! function of `(master seed, purpose, block, channel)`. Streams never share
//! state, so blocks can be simulated in any order or on any thread and still
//! produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Bits = 1,
    Arrivals = 2,
    Pilot = 3,
    Training = 4,
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub block: u64,
    pub channel: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose, block: u64, channel: u64) -> Self {
        Self {
            seed,
            purpose,
            block,
            channel,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        key[16..24].copy_from_slice(&self.block.to_le_bytes());
        key[24..32].copy_from_slice(&self.channel.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Derives a child master seed, used to keep e.g. optimizer training data
/// disjoint from evaluation data.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
