//! Seeded, splittable random streams.
//!
//! Every sampler takes a `u64` seed and pulls its randomness from a ChaCha
//! stream keyed by that seed. Independent pieces (matrix blocks, Monte Carlo
//! trials) get distinct stream ids, so they can be generated in any order or
//! in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags. The high 32 bits of a stream id name the consumer, the low
/// 32 bits index within it.
pub mod tag {
    pub const GINIBRE: u64 = 1;
    pub const STRICT_UPPER: u64 = 2;
    pub const DIAGONAL: u64 = 3;
    pub const BLOCK: u64 = 4;
    pub const PERTURBATION: u64 = 5;
    pub const MEASURE: u64 = 6;
    pub const MONTE_CARLO: u64 = 7;
    pub const TRIAL_SEED: u64 = 8;
}

pub fn stream(seed: u64, tag: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | (index & 0xffff_ffff));
    rng
}

/// Derives a child seed, for handing a whole sub-experiment its own seed.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, tag::TRIAL_SEED, index).next_u64()
}
