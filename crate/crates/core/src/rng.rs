//! Seed derivation.
//!
//! Every random draw in a run flows from one user seed through named
//! substreams (`"vae"`, `"split"`, `"latent"`, `"mc"`, ...), optionally
//! indexed (trial number, data-point index). Substreams are independent of
//! the order in which they are requested, so parallel schedules reproduce
//! sequential ones exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `(seed, name, index)`.
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    for b in name.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    rng_from_seed(derive_seed(seed, name, index))
}
