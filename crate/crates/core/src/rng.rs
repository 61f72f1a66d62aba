//! Reproducible random-number streams.
//!
//! A master seed plus a `(lane, index)` pair identifies an independent
//! ChaCha8 stream. Lanes separate different sources of randomness (event
//! counts, event vectors, interest rates, bootstrap replicates); the index is
//! typically the replication number. Because every replication owns its
//! stream, results do not depend on how replications are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the engine.
pub type SimRng = ChaCha8Rng;

/// A master seed from which independent substreams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed(u64);

impl StreamSeed {
    pub fn new(seed: u64) -> Self {
        StreamSeed(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    /// Stream `index` of `lane`.
    pub fn substream(&self, lane: u64, index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.0 ^ splitmix64(lane)));
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard exponential draw.
#[inline]
pub fn exp1<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -open01(rng).ln()
}
