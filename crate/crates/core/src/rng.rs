//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by a 64-bit
//! seed and selected by a 64-bit stream index. Independent work items
//! (sensing events, bootstrap replicas, sweep points) take their item index
//! as the stream index, so results do not depend on which worker runs them
//! or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream `index` of the family keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an unrelated seed from `(seed, tag)` with the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tags for [`derive_seed`]; one per independent use of a master seed.
pub mod tags {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const ENSEMBLE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const SWEEP: u64 = 6;
}
