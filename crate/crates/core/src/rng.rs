//! Seeded random streams.
//!
//! Every stochastic choice in the crate draws from [`SplitMix64`], a fixed
//! 64-bit generator (Steele, Lea & Flood 2014), so instance files, sampled
//! states and rollouts are bit-reproducible from a seed on any platform.
//!
//! The derived operations are part of that contract:
//!
//! * [`SplitMix64::below`] draws an unbiased integer in `0..n` by rejection:
//!   raw outputs smaller than `2^64 mod n` are discarded and the remaining
//!   value is reduced modulo `n`.
//! * [`SplitMix64::shuffle`] is Fisher–Yates from the last index down,
//!   swapping position `i` with `below(i + 1)`.
//! * [`derive_seed`] builds child seeds for independent sub-streams, so work
//!   split across threads draws the same numbers as a sequential run.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a sequence of integer tags.
///
/// Distinct tag sequences give statistically independent streams.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    let mut h = mix64(parent ^ GOLDEN_GAMMA);
    for &t in tags {
        h = mix64(h ^ mix64(t.wrapping_add(GOLDEN_GAMMA)));
    }
    h
}

/// FNV-1a 64-bit hash, used to turn string ids into seed tags.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// A generator seeded from `derive_seed(parent, tags)`.
    pub fn child(parent: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(parent, tags))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) has no valid output");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `count` distinct values from `0..n`, in draw order (partial Fisher–Yates).
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> alloc::vec::Vec<usize> {
        assert!(count <= n, "cannot draw {count} distinct values from {n}");
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}
