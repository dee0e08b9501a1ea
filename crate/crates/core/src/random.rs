//! Seeded, platform-independent randomness.
//!
//! Every stochastic operation in the crate draws from a [`RandomSource`]. Child
//! streams for independent trials are derived with [`mix_seed`], so a parallel
//! sweep reproduces the sequential one bit for bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser applied to `seed ^ (index * golden)`.
///
/// Used to derive per-trial seeds from a master seed:
/// `z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)` followed by the
/// standard SplitMix64 avalanche.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic random stream (ChaCha8) identified by its seed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for trial `index`, derived from this source's seed
    /// (not its current position).
    pub fn derive(&self, index: u64) -> Self {
        Self::new(mix_seed(self.seed, index))
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw from `[low, high)`.
    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// `true` with probability `p` (one uniform draw, `u < p`).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn derive_ignores_position() {
        let base = RandomSource::new(3);
        let mut moved = base.clone();
        moved.uniform();
        assert_eq!(base.derive(5).uniform(), moved.derive(5).uniform());
        assert_ne!(base.derive(5).seed(), base.derive(6).seed());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = RandomSource::new(11);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn mix_seed_is_fixed() {
        // Pinned so external reimplementations can check themselves.
        assert_eq!(mix_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }
}
