//! Seed plumbing. Every stochastic routine takes a `u64` seed and builds its
//! own ChaCha stream, so results depend only on (inputs, seed).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable child seed for a named sub-stream (FNV-1a over the tag, mixed
/// with the parent through splitmix64).
pub fn derive_seed(parent: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(parent ^ splitmix64(h))
}

pub fn derive_seed_idx(parent: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(parent, tag) ^ splitmix64(index))
}

/// Deterministic draw in [0, 1) from a seed, without building a generator.
pub fn unit_from_seed(seed: u64) -> f64 {
    (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64
}
