//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream, addressed by
//! a 64-bit key and a [`Stream`] id. Streams are counter-based, so the values a
//! consumer sees never depend on how much another consumer has drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named sub-streams used by data generation, splitting and fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Covariates = 1,
    FeatureSets = 2,
    Weights = 3,
    Nonlinearity = 4,
    IrrelevantIndex = 5,
    Assignment = 6,
    Noise = 7,
    Split = 8,
    Fit = 9,
    Attribution = 10,
    Query = 11,
}

/// A family of independent streams derived from one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    key: u64,
}

impl Streams {
    pub fn new(key: u64) -> Self {
        Self { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn stream(&self, stream: Stream) -> Rng {
        self.indexed(stream, 0)
    }

    /// Stream `stream` with an additional index, e.g. one per learner.
    pub fn indexed(&self, stream: Stream, index: u64) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(((stream as u64) << 32) | (index & 0xffff_ffff));
        rng
    }

    /// A child family, e.g. one per fitted network.
    pub fn child(&self, salt: u64) -> Streams {
        Streams::new(mix(self.key ^ mix(salt.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }
}

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Convenience for call sites that only need a single seeded generator.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
