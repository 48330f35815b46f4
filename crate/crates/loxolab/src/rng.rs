//! Counter-based pseudorandom generator.
//!
//! Every Monte Carlo statistic in the crate is keyed by `(seed, substream,
//! counter)`, so runs are reproducible across machines and across thread
//! counts: parallel workers draw from disjoint substreams and the merge is a
//! plain sum.

use num_bigint::BigUint;
use num_traits::Zero;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 run in counter mode: output `i` is `mix(key + i*GOLDEN)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: mix(seed ^ GOLDEN), counter: 0 }
    }

    /// Derives an independent stream; used to fan out over workers or over
    /// experiment grid points.
    pub fn substream(&self, index: u64) -> Self {
        CounterRng {
            key: mix(self.key ^ mix(index.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        out
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform draw in `[0, n)` (Lemire widening multiply).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Exactly uniform draw in `[0, n)` for arbitrary-precision `n`.
    pub fn next_biguint_below(&mut self, n: &BigUint) -> BigUint {
        assert!(!n.is_zero());
        if let Ok(small) = u64::try_from(n) {
            return BigUint::from(self.next_below(small));
        }
        let bits = n.bits();
        let words = bits.div_ceil(64) as usize;
        let top_mask: u64 = if bits % 64 == 0 { u64::MAX } else { (1u64 << (bits % 64)) - 1 };
        loop {
            let mut digits = Vec::with_capacity(words);
            for w in 0..words {
                let mut d = self.next_u64();
                if w + 1 == words {
                    d &= top_mask;
                }
                digits.push(d);
            }
            let candidate = BigUint::from_slice(
                &digits
                    .iter()
                    .flat_map(|d| [*d as u32, (*d >> 32) as u32])
                    .collect::<Vec<_>>(),
            );
            if &candidate < n {
                return candidate;
            }
        }
    }
}
