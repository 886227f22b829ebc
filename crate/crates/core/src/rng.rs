//! Small deterministic PRNG (splitmix64) with Gaussian sampling.
//!
//! Every stochastic piece of the pipeline (process noise, schedule jitter,
//! weight init, dropout, shuffles) draws from this generator so that a fixed
//! seed gives bit-identical results on every run and platform.

use crate::float;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 stream with a one-slot cache for Box-Muller pairs.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare_normal: None,
        }
    }

    /// A generator for `(seed, stream)` pairs; distinct streams decorrelate
    /// per-step / per-purpose noise without threading mutable state around.
    pub fn from_seed_stream(seed: u64, stream: u64) -> Self {
        let mut mixer = SplitMix64::new(seed);
        let a = mixer.next_u64();
        let mut mixer = SplitMix64::new(stream.wrapping_mul(GOLDEN) ^ 0x5851_F42D_4C95_7F2D);
        let b = mixer.next_u64();
        SplitMix64::new(a ^ b)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in (0, 1]; safe as a log argument.
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). n must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        // 128-bit multiply-shift; bias is < 2^-64 and irrelevant here.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller (cached pair).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = float::sqrt(-2.0 * float::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * float::sin(theta));
        r * float::cos(theta)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
