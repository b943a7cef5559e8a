//! Seeded random number streams.
//!
//! Every chain draws from ChaCha8 keyed by the run seed; replicate chains use
//! distinct stream ids of the same key, which ChaCha guarantees to be
//! non-overlapping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
