//! Seed namespacing. Every random stream in a run is derived from the master
//! seed, a namespace tag and an index, so streams never overlap by accident.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Candidate sampling inside CMA-ES.
pub const NS_SEARCH: u64 = 0x5345_4152_4348;
/// Per-generation training θ batches.
pub const NS_TRAIN_THETA: u64 = 0x5452_4149_4e54;
/// Held-out evaluation draws.
pub const NS_HELD_OUT: u64 = 0x4845_4c44_4f55;
/// Vision loop states.
pub const NS_VISION: u64 = 0x5649_5349_4f4e;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, namespace: u64, index: u64) -> u64 {
    splitmix(splitmix(master ^ splitmix(namespace)).wrapping_add(index))
}

pub fn rng(master: u64, namespace: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, namespace, index))
}
