//! Seeded random numbers.
//!
//! Everything random in the crate (edge/vertex sub-sampling, random pooling,
//! weight init, synthetic data) draws from SplitMix64 so that results can be
//! reproduced bit-for-bit from another language:
//!
//! * state `x += 0x9e3779b97f4a7c15`, output `z = mix(x)` (Stafford variant 13);
//! * a uniform double in `[0, 1)` is `(next_u64 >> 11) * 2^-53`;
//! * a uniform index in `0..n` is `floor(u01 * n)`.

use rand_core::{Rng as _, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct Rng64(SplitMix64);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}
