//! Seeded generators. Every random draw in the crate goes through [`stream`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`; streams never overlap.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Well-known stream ids so that adding a consumer never shifts another one.
pub mod streams {
    pub const COHORT: u64 = 1;
    pub const MEALS: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const POLICY: u64 = 4;
    pub const INIT: u64 = 5;
    pub const WARMUP: u64 = 6;
    pub const SIMULATE: u64 = 7;
}
