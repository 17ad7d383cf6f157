//! Reproducible random streams.
//!
//! Every unit of Monte Carlo work (for instance replication `r` at sample
//! size `n`) draws from its own ChaCha8 stream: the key comes from the
//! master seed, the stream id from a hash of the work coordinates. Results
//! therefore do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a tuple of work coordinates.
pub fn stream_id(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6a09_e667_f3bc_c909, |h, &k| mix(h ^ mix(k)))
}

/// The generator for work unit `keys` under `seed`.
pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(keys));
    rng
}
