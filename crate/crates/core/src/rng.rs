//! Seeded random substreams.
//!
//! Every stochastic routine derives its generator from a `(seed, stream)`
//! pair so that results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Substream keyed by two indices, e.g. (run, dataset).
pub fn substream2(seed: u64, major: u64, minor: u64) -> SimRng {
    substream(seed ^ minor.wrapping_mul(0x9E37_79B9_7F4A_7C15), major)
}
