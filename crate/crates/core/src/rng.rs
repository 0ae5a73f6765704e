//! Seed derivation and substream construction for reproducible parallel
//! Monte Carlo. Every replication draws from its own ChaCha stream, so
//! results are identical regardless of how work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a stable, dependency-free 64-bit mixer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent seed from a master seed and a salt (dimension
/// index, grid-cell tag, ...). Deterministic; distinct salts give unrelated
/// streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// RNG for one replication: the seed selects the key, the stream index the
/// substream. Streams never overlap, so per-replication draws are independent
/// of worker count and iteration order.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
