//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`): a
//! counter-based generator with a 64-bit block counter and a 64-bit stream
//! id, whose output for a given key is fixed across platforms. Each use site
//! draws from its own stream id, and per-item generators (one per epoch and
//! session, say) derive their key from the run seed with SplitMix64, so a
//! result never depends on how many draws some other component made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DgRng = ChaCha8Rng;

/// Stream ids for the independent consumers of a run seed.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const EVAL: u64 = 7;
}

/// Generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> DgRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Generator for `stream` keyed by `seed` and a path of item ids
/// (e.g. `[epoch, session]`).
pub fn derive(seed: u64, stream_id: u64, path: &[u64]) -> DgRng {
    let key = path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)));
    stream(key, stream_id)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
