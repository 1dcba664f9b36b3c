//! Counter-addressed random streams.
//!
//! Every stochastic quantity draws from a stream keyed by
//! `(global seed, index, purpose)`, so results do not depend on the order in
//! which replications are scheduled or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Tags separating independent uses of the same `(seed, index)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Replication = 1,
    FisherJoint = 2,
    FisherHessian = 3,
    Redundancy = 4,
    Floor = 5,
    Sampling = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(seed, index, purpose)` used as the stream key.
pub fn stream_key(seed: u64, index: u64, purpose: Purpose) -> u64 {
    let h = splitmix64(seed ^ 0x5EED_0000_0000_0000);
    let h = splitmix64(h ^ index);
    splitmix64(h ^ (purpose as u64).rotate_left(32))
}

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, index, purpose))
}
