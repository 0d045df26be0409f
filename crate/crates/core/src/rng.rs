//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream. The key is
//! `ChaCha8Rng::seed_from_u64(seed)` and the 64-bit stream id is the FNV-1a
//! hash of the consumer's label, so adding a consumer never shifts the draws
//! of another. Gaussians come from the ziggurat sampler of `rand_distr::StandardNormal`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::config_err;
use crate::Result;

/// Label of the stream that generates datasets.
pub const DATA: &str = "data";
/// Label of the stream driving batch indices and Brownian increments.
pub const DYNAMICS: &str = "dynamics";
/// Label of the stream drawing label-noise signs.
pub const LABEL_NOISE: &str = "label_noise";

/// 64-bit FNV-1a hash, used as the ChaCha stream id of a label.
pub fn label_stream_id(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The stream for one `(seed, label)` pair.
pub fn stream(seed: u64, label: &str) -> Sampler {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_stream_id(label));
    Sampler::new(rng)
}

/// Independent streams for several labels; duplicate labels are rejected.
pub fn rng_streams(seed: u64, labels: &[&str]) -> Result<Vec<Sampler>> {
    let mut seen = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for l in labels {
        if !seen.insert(*l) {
            return Err(config_err!("duplicate rng stream label {l:?}"));
        }
        if !ids.insert(label_stream_id(l)) {
            return Err(config_err!("rng stream label {l:?} collides with another label"));
        }
    }
    Ok(labels.iter().map(|l| stream(seed, l)).collect())
}

/// A ChaCha8 generator with uniform, index and Gaussian helpers.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (rejection sampling, unbiased).
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.rng.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fair coin.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.rng)
    }

    /// Fills `out` with i.i.d. `N(0, scale²)` draws.
    pub fn fill_normal(&mut self, scale: f64, out: &mut [f64]) {
        for o in out {
            *o = scale * self.normal();
        }
    }

    /// Partial Fisher–Yates: the first `k` entries of `perm` become a uniform
    /// sample without replacement from `perm`'s contents.
    pub fn partial_shuffle(&mut self, perm: &mut [usize], k: usize) {
        let n = perm.len();
        for i in 0..k.min(n) {
            let j = i + self.index(n - i);
            perm.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_label_same_stream() {
        let mut a = stream(3, "x");
        let mut b = stream(3, "x");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(rng_streams(1, &["a", "b", "a"]).is_err());
        assert_eq!(rng_streams(1, &["a", "b"]).unwrap().len(), 2);
    }

    #[test]
    fn adding_a_label_leaves_others_untouched() {
        let mut two = rng_streams(9, &[DATA, DYNAMICS]).unwrap();
        let mut three = rng_streams(9, &[DATA, LABEL_NOISE, DYNAMICS]).unwrap();
        for _ in 0..50 {
            assert_eq!(two[0].next_u64(), three[0].next_u64());
            assert_eq!(two[1].next_u64(), three[2].next_u64());
        }
    }

    #[test]
    fn normal_moments() {
        let mut s = stream(11, "moments");
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 0.01, "mean {m1}");
        assert!((m2 - 1.0).abs() < 0.015, "var {m2}");
    }

    #[test]
    fn partial_shuffle_is_a_sample_without_replacement() {
        let mut s = stream(5, "perm");
        let mut p: Vec<usize> = (0..10).collect();
        s.partial_shuffle(&mut p, 4);
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        let head = &p[..4];
        assert!(head.iter().all(|&v| v < 10));
    }
}
