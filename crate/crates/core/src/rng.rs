//! Portable deterministic pseudo-randomness.
//!
//! Every random decision in the simulator flows through [`SplitMix64`]: a
//! 64-bit mix generator with a splittable stream, so component seeds can be
//! derived from one master seed without correlated streams. The generator is
//! pure integer arithmetic and produces identical sequences on every platform
//! and build, which is what makes run artifacts byte-reproducible.

/// SplitMix64 generator (Steele, Lea, Flood's mix constants).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }

    /// Uniform f64 in [0, 1), 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in 0..n. Panics if n = 0.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        // Multiply-shift bounding; the bias for simulator-scale n is < 2^-40.
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Derive an independent child generator. The parent advances one step.
    pub fn split(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }
}

/// The SplitMix64 finalizer, also usable as a standalone 64-bit mixer
/// for hashing small integer tuples into well-distributed words.
pub fn mix64(z: u64) -> u64 {
    let mut z = z;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into one mixed word. Order-sensitive.
pub fn mix_words(words: &[u64]) -> u64 {
    let mut acc = 0x51AF_D54E_4260_77D6u64;
    for &w in words {
        acc = mix64(acc ^ w.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    mix64(acc)
}

/// Map a mixed word to a unit-interval f64 in [0, 1).
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seed_identical_stream() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_diverge() {
        let mut root = SplitMix64::new(7);
        let mut child = root.split();
        let taken: Vec<u64> = (0..64).map(|_| child.next_u64()).collect();
        let parent: Vec<u64> = (0..64).map(|_| root.next_u64()).collect();
        assert_ne!(taken, parent);
    }

    #[test]
    fn index_in_bounds_and_covers() {
        let mut rng = SplitMix64::new(99);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            let i = rng.index(5);
            assert!(i < 5);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn unit_f64_in_range() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..1000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn index_roughly_uniform() {
        // Chi-square over 10^4 draws, 5 bins, df = 4: critical value at
        // p = 0.01 is 13.28.
        let mut rng = SplitMix64::new(123);
        let mut counts = [0f64; 5];
        let n = 10_000;
        for _ in 0..n {
            counts[rng.index(5)] += 1.0;
        }
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.28, "chi2 = {chi2}");
    }
}
