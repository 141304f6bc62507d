//! Deterministic seed derivation.
//!
//! Every source of randomness in the workspace is a ChaCha stream seeded
//! through this module, so that a run is a pure function of its configured
//! seeds. Derived seeds decorrelate a base seed across clients, engines,
//! flights and epochs.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Mixes a base seed with a salt into an independent stream seed
/// (splitmix64 finalizer over the combined value).
pub fn derive(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha20 stream for the given seed.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
