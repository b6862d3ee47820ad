//! Seeded randomness.
//!
//! Every random draw in the crate comes from a splitmix64 stream. A run has one
//! master seed. Node splits read a stream seeded with it directly; every other
//! purpose (initialization, dropout, synthetic data) derives its own substream
//! from the master seed and a purpose tag, so adding draws for one purpose never
//! shifts another.

use rand_core::RngCore;
use rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;

/// Purpose tags for substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Dropout,
    Synthetic,
    Check,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x494e_4954_0000_0002,
            Purpose::Dropout => 0x4452_4f50_0000_0003,
            Purpose::Synthetic => 0x5359_4e54_0000_0004,
            Purpose::Check => 0x4348_4543_4b00_0005,
        }
    }
}

/// A splitmix64 stream with the handful of draws the crate needs.
#[derive(Debug, Clone)]
pub struct Stream {
    inner: SplitMix64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { inner: SplitMix64::seed_from_u64(seed) }
    }

    /// Substream for `purpose` under `master`.
    pub fn substream(master: u64, purpose: Purpose) -> Self {
        // Mix the tag through one splitmix round so nearby master seeds do not
        // produce overlapping streams.
        let mut mixer = SplitMix64::seed_from_u64(master ^ purpose.tag());
        Stream::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi].
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in [0, bound). `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        loop {
            let u1 = self.uniform();
            if u1 > 0.0 {
                let u2 = self.uniform();
                return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            p.swap(i, j);
        }
        p
    }
}
