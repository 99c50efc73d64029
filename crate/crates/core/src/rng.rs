//! Deterministic random number generation.
//!
//! Every stochastic step in the pipeline (synthetic data, dataset splits,
//! weight init, dropout, attack noise, evaluation perturbations) draws from
//! [`DetRng`], a ChaCha8 stream cipher generator with hand-written
//! distribution transforms. ChaCha8's output is fully determined by its key
//! and stream position, uniform doubles are built from the high 53 bits of
//! each 64-bit word, and normal deviates use the Box-Muller transform, so a
//! given `(seed, stream)` pair produces the same byte-identical sequence on
//! every platform and every run.
//!
//! Independent substreams are keyed by `(seed, stream index)` via the ChaCha
//! stream parameter; per-sample substreams mean results never depend on the
//! order in which samples are processed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Multiplier for mapping the top 53 bits of a `u64` into `[0, 1)`.
const F64_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

/// Deterministic generator over a ChaCha8 keystream.
#[derive(Debug, Clone)]
pub struct DetRng {
    inner: ChaCha8Rng,
}

impl DetRng {
    /// Generator for the main stream (stream index 0) of `seed`.
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Generator for an independent substream of `seed`.
    ///
    /// Streams with different indices never overlap, so callers may key a
    /// substream per sample (or per epoch) and process them in any order.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw from `[0, 1)`: the top 53 bits of one keystream word.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * F64_SCALE
    }

    /// Uniform draw from `(0, 1]`, used where `ln` of the draw is taken.
    fn uniform01_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * F64_SCALE
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Standard normal deviate via the Box-Muller transform.
    ///
    /// Consumes exactly two keystream words. Only the cosine branch is used
    /// so the generator stays stateless between calls.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform01_open_low();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Normal deviate with mean 0 and the given standard deviation.
    pub fn normal_scaled(&mut self, std_dev: f64) -> f64 {
        std_dev * self.normal()
    }

    /// Unbiased integer draw from `[0, n)` by rejection sampling.
    pub fn range_usize(&mut self, n: usize) -> usize {
        assert!(n > 0, "range_usize requires n > 0");
        let n = n as u64;
        // Reject draws from the final partial block so every value is
        // equally likely.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.range_usize(i + 1);
            slice.swap(i, j);
        }
    }
}

/// Derives a child seed from a master seed and a sequence of context words.
///
/// Each part is absorbed through a SplitMix64 finalizer, so distinct part
/// sequences give unrelated seeds. Used to key per-purpose generators
/// (split, init, per-cell evaluation noise, ...) off one master seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0x9e37_79b9_7f4a_7c15);
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
