//! Per-replica random streams.
//!
//! A replica's generator depends only on the run seed and the replica index
//! (plus a retry counter), never on scheduling, so replicas can run in any
//! order on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, index, attempt)`: `seed ⊕ hash(index, attempt)`.
pub fn replica_rng(seed: u64, index: u64, attempt: u64) -> ReplicaRng {
    let key = mix64(index ^ mix64(attempt.wrapping_add(0x5eed)));
    ChaCha8Rng::seed_from_u64(seed ^ key)
}

/// Independent stream for a named purpose within a replica.
pub fn sub_rng(seed: u64, index: u64, attempt: u64, purpose: u64) -> ReplicaRng {
    let mut rng = replica_rng(seed, index, attempt);
    rng.set_stream(purpose);
    rng
}
