//! Deterministic seeded random stream.
//!
//! [`RngStream`] is SplitMix64 used as a counter-based generator: the `i`-th
//! output is `mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`. The integer sequence
//! depends only on the seed, so it is identical on every platform. Normal
//! deviates come from the Box-Muller transform (cosine branch only), which
//! goes through the platform `ln`/`cos`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner pseudo-random stream. Not `Sync`-shared by design of use:
/// hand each thread its own [`RngStream::fork`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// An independent stream keyed by `(seed, label)`. Does not advance `self`.
    pub fn fork(&self, label: u64) -> RngStream {
        RngStream::new(mix(self.seed ^ mix(label.wrapping_add(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self
            .seed
            .wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `0..n` (multiply-shift; `n` must be positive).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform integer in `low..=high`.
    pub fn int_inclusive(&mut self, low: i64, high: i64) -> i64 {
        assert!(low <= high);
        low + self.below((high - low + 1) as usize) as i64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal deviate. Consumes two words.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, stddev: f64) -> f64 {
        mean + stddev * self.standard_normal()
    }

    /// Tensor of independent normal samples.
    pub fn normal_tensor(
        &mut self,
        shape: impl Into<Vec<usize>>,
        mean: f64,
        stddev: f64,
    ) -> Result<Tensor> {
        if !(stddev >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "normal stddev must be non-negative, got {stddev}"
            )));
        }
        let mut t = Tensor::zeros(shape)?;
        for v in t.data_mut() {
            *v = self.normal(mean, stddev);
        }
        Ok(t)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
