//! Deterministic pseudo-random numbers.
//!
//! Everything in this crate that needs randomness (parameter init, epoch
//! shuffles, corpus generation, variable selection) draws from [`SplitMix64`],
//! a 64-bit splitmix-style generator: the state advances by the golden-ratio
//! increment `0x9E3779B97F4A7C15` and each output is finalized with the
//! `xorshift * 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB` mixing steps. The same
//! seed produces the same stream on every platform, which is what makes
//! checkpoints and reports byte-reproducible.

/// Splitmix-style 64-bit PRNG. Small state, full determinism.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform f64 in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform usize in [0, n). Uses the 128-bit multiply reduction; the
    /// (negligible) modulo bias is irrelevant here, determinism is not.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Derives an independent stream seed from a base seed and a tag, so that
/// per-example or per-cell generators never share state.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix(mix(base ^ GOLDEN.wrapping_mul(tag)).wrapping_add(tag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_interval() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..1000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SplitMix64::new(9);
        for n in 1..50 {
            for _ in 0..20 {
                assert!(rng.below(n) < n);
            }
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s = derive_seed(1, 0);
        assert_ne!(s, derive_seed(1, 1));
        assert_ne!(s, derive_seed(2, 0));
        assert_eq!(s, derive_seed(1, 0));
    }
}
