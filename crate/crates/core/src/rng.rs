//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 generator keyed by the run seed
//! and a fixed per-purpose stream id, so that one seed drives the whole
//! pipeline without two stages sharing a random sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    KMeansInit = 1,
    Split = 2,
    NetInit = 3,
    Shuffle = 4,
    Svm = 5,
    Synthetic = 6,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
