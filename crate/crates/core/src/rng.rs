//! Seed handling. Every experiment tuple owns an independent ChaCha stream
//! derived from the master seed and a stable tuple key, so results do not
//! depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type ExperimentRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    /// The stream with index 0.
    pub fn rng(self) -> ExperimentRng {
        self.stream(0)
    }

    pub fn stream(self, index: u64) -> ExperimentRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Stream keyed by a tuple of integers (e.g. experiment tag, case, dim, seed).
    pub fn keyed(self, key: &[u64]) -> ExperimentRng {
        self.stream(mix_key(key))
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn mix_key(key: &[u64]) -> u64 {
    key.iter()
        .fold(0x5851_f42d_4c95_7f2d, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seed_identical_stream() {
        let a: Vec<u64> = RngSeed(7).keyed(&[1, 2, 3]).random_iter().take(8).collect();
        let b: Vec<u64> = RngSeed(7).keyed(&[1, 2, 3]).random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_keys_give_distinct_streams() {
        let a: u64 = RngSeed(7).keyed(&[1, 2, 3]).random();
        let b: u64 = RngSeed(7).keyed(&[1, 2, 4]).random();
        let c: u64 = RngSeed(8).keyed(&[1, 2, 3]).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
