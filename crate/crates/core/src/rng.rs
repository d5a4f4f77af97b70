//! Seeded random streams.
//!
//! Every replicate of an experiment draws from its own stream derived from
//! `(master seed, replicate index, lane)`, so results do not depend on the
//! order in which replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent purposes within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    Chain = 1,
    Graph = 2,
    Batch = 3,
    Classifier = 4,
    Aux = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `lane` of replicate `index` under `master`.
pub fn derive_seed(master: u64, index: u64, lane: Lane) -> u64 {
    splitmix(splitmix(splitmix(master) ^ index) ^ lane as u64)
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_stream(master: u64, index: u64, lane: Lane) -> Stream {
    stream(derive_seed(master, index, lane))
}
