//! Counter-based deterministic random numbers.
//!
//! Sampling draws one uniform per tensor entry, keyed by `(seed, entry index)`.
//! A keyed stateless mix keeps the draw for entry `i` independent of how (or on
//! how many threads) the other entries are processed, so sampled graphs are
//! reproducible bit-for-bit.

/// SplitMix64-style finalizer over a `(seed, counter)` key.
#[inline]
pub fn mix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` for the given key.
#[inline]
pub fn unit_f64(seed: u64, counter: u64) -> f64 {
    // 53 high bits -> exactly representable dyadic rational in [0,1)
    (mix64(seed, counter) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Derives an independent stream seed from a parent seed and a context tag.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed, tag)
}

/// A sequential deterministic stream over the counter-based generator.
#[derive(Debug, Clone)]
pub struct Stream {
    seed: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { seed, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.seed, self.counter);
        self.counter += 1;
        v
    }

    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        let v = unit_f64(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Unbiased integer in `[0, n)` via 128-bit multiply rejection.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            let low = m as u64;
            if low >= n {
                return (m >> 64) as u64;
            }
            // reject the biased low range
            let threshold = n.wrapping_neg() % n;
            if low >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }
}
