//! Deterministic RNG for sampling actions, generating traces, and test inputs.
//!
//! SplitMix64: the state is a counter advanced by a fixed odd increment and
//! each output is a finalizer of the counter value, so streams can be split
//! safely and output is stable across platforms. Not cryptographic.

/// Golden-ratio increment; also used to remap stream ids.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Fixed substream tags, so the draws that build a trace can never collide
/// with the draws a policy makes while running on it under the same seed.
pub mod stream {
    /// Trace generation (noise entries).
    pub const TRACE: u64 = 1;
    /// Policy action sampling. Shared by every policy wrapper so that
    /// wrappers consuming one draw per round stay in lockstep.
    pub const POLICY: u64 = 2;
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based deterministic generator with a single 64-bit state.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent substream: distinct `stream` values under the same seed
    /// yield decorrelated sequences (trace noise vs. policy sampling).
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self {
            state: seed ^ mix(stream.wrapping_mul(GAMMA).wrapping_add(GAMMA)),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw in `(0, 1]`; safe to pass through `ln`.
    #[inline]
    pub fn next_f64_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard Gaussian via Box-Muller. Consumes exactly two draws.
    pub fn next_gaussian(&mut self) -> f64 {
        let r = self.next_f64_pos();
        let theta = std::f64::consts::TAU * self.next_f64();
        (-2.0 * r.ln()).sqrt() * theta.cos()
    }

    /// Sample an index from a probability vector by inverse CDF, walking the
    /// entries in stored order. Consumes exactly one draw, which keeps
    /// different policy wrappers with identical distributions in lockstep.
    pub fn sample_index(&mut self, probs: &[f64]) -> usize {
        debug_assert!(!probs.is_empty());
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_across_instances() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = SplitMix64::substream(7, 0);
        let mut b = SplitMix64::substream(7, 1);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_range_and_mean() {
        let mut rng = SplitMix64::new(3);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        // Mean of n uniforms has sd ~ 1/sqrt(12 n) ~ 9e-4.
        assert!((sum / n as f64 - 0.5).abs() < 5e-3);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = SplitMix64::new(11);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = rng.next_gaussian();
            s1 += g;
            s2 += g * g;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn sample_index_matches_weights() {
        let mut rng = SplitMix64::new(5);
        let probs = [0.2, 0.3, 0.5];
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[rng.sample_index(&probs)] += 1;
        }
        for (c, p) in counts.iter().zip(probs.iter()) {
            let freq = *c as f64 / n as f64;
            // 4 standard errors of a Bernoulli(p) mean.
            let slack = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < slack, "freq {freq} vs p {p}");
        }
    }

    #[test]
    fn sample_index_degenerate() {
        let mut rng = SplitMix64::new(9);
        assert_eq!(rng.sample_index(&[1.0]), 0);
        // A u drawn above the accumulated mass falls through to the last arm.
        assert_eq!(rng.sample_index(&[0.0, 0.0]), 1);
    }
}
