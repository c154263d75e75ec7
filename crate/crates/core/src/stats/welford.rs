// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Running mean and sum of squared deviations of a stream of per-cell deltas,
/// plus sign counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeAccumulator {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub pos: u64,
    pub neg: u64,
    pub zero: u64,
}

/// Effect size and sign consistency of one accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    /// Cohen's d: mean over sample standard deviation. `±inf` when every
    /// delta is the same non-zero value; 0 when the mean is 0.
    pub d: f64,
    pub consistency: f64,
    pub n: u64,
}

impl EdgeAccumulator {
    pub const fn new() -> Self {
        Self { n: 0, mean: 0.0, m2: 0.0, pos: 0, neg: 0, zero: 0 }
    }

    #[inline]
    pub fn update(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        if x > 0.0 {
            self.pos += 1;
        } else if x < 0.0 {
            self.neg += 1;
        } else {
            self.zero += 1;
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Self::new();
        xs.iter().for_each(|&x| acc.update(x));
        acc
    }

    /// Combines two partial accumulators as if their streams were concatenated.
    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let (na, nb, nf) = (self.n as f64, other.n as f64, n as f64);
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * nb / nf,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nf,
            pos: self.pos + other.pos,
            neg: self.neg + other.neg,
            zero: self.zero + other.zero,
        }
    }

    /// Sample variance `M2 / (n - 1)`.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn finalize(&self) -> Result<EdgeStats> {
        if self.n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.n as usize });
        }
        let n = self.n as f64;
        let s = (self.m2.max(0.0) / (n - 1.0)).sqrt();
        let (d, consistency) = if self.mean > 0.0 {
            (self.mean / s, self.pos as f64 / n)
        } else if self.mean < 0.0 {
            (self.mean / s, self.neg as f64 / n)
        } else {
            (0.0, 0.0)
        };
        // mean / 0 already yields the ±inf sentinel for zero-variance streams.
        Ok(EdgeStats { d, consistency, n: self.n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        (mean, m2)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn worked_example() {
        let acc = EdgeAccumulator::from_slice(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(acc.mean, 5.0);
        assert!(rel(acc.variance().unwrap(), 32.0 / 7.0) < 1e-12);
    }

    #[test]
    fn single_value() {
        let acc = EdgeAccumulator::from_slice(&[3.5]);
        assert_eq!((acc.n, acc.mean, acc.m2), (1, 3.5, 0.0));
        assert!(matches!(acc.finalize(), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn sign_counts() {
        let acc = EdgeAccumulator::from_slice(&[1.0, -1.0]);
        assert_eq!((acc.pos, acc.neg, acc.zero, acc.mean), (1, 1, 0, 0.0));
        let acc = EdgeAccumulator::from_slice(&[0.0, 2.0, 0.0]);
        assert_eq!((acc.pos, acc.zero), (1, 2));
    }

    #[test]
    fn merge_matches_sequential() {
        let a = EdgeAccumulator::from_slice(&[1.0, 2.0]);
        let b = EdgeAccumulator::from_slice(&[3.0, 4.0]);
        let all = EdgeAccumulator::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let m = a.merge(&b);
        assert!(rel(m.mean, all.mean) < 1e-12 && rel(m.m2, all.m2) < 1e-12);
        assert_eq!(a.merge(&EdgeAccumulator::new()), a);
        assert_eq!(EdgeAccumulator::new().merge(&a), a);
    }

    #[test]
    fn cohens_d_and_consistency() {
        // mean 1, sd 0.5
        let acc = EdgeAccumulator::from_slice(&[0.5, 1.5, 0.5, 1.5]);
        let s = (acc.m2 / 3.0).sqrt();
        let st = acc.finalize().unwrap();
        assert!((st.d - 1.0 / s).abs() < 1e-12);
        let st = EdgeAccumulator::from_slice(&[1.0, 2.0, 3.0, -1.0]).finalize().unwrap();
        assert_eq!(st.consistency, 0.75);
        assert!(st.d > 0.0);
    }

    #[test]
    fn degenerate_streams() {
        let st = EdgeAccumulator::from_slice(&[0.0; 5]).finalize().unwrap();
        assert_eq!((st.d, st.consistency), (0.0, 0.0));
        let st = EdgeAccumulator::from_slice(&[-0.25; 6]).finalize().unwrap();
        assert_eq!(st.d, f64::NEG_INFINITY);
        assert_eq!(st.consistency, 1.0);
    }

    proptest! {
        #[test]
        fn merge_is_order_free(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200, cut2 in 0usize..200) {
            let cut = cut % xs.len();
            let cut2 = cut2 % xs.len();
            let (lo, hi) = (cut.min(cut2), cut.max(cut2));
            let a = EdgeAccumulator::from_slice(&xs[..lo]);
            let b = EdgeAccumulator::from_slice(&xs[lo..hi]);
            let c = EdgeAccumulator::from_slice(&xs[hi..]);
            let left = a.merge(&b).merge(&c);
            let right = c.merge(&a.merge(&b)).merge(&EdgeAccumulator::new());
            let (mean, m2) = two_pass(&xs);
            for acc in [left, right] {
                prop_assert_eq!(acc.n as usize, xs.len());
                prop_assert!((acc.mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
                prop_assert!((acc.m2 - m2).abs() <= 1e-9 * m2.max(1.0));
                prop_assert_eq!(acc.pos + acc.neg + acc.zero, acc.n);
            }
            let seq: Vec<f64> = xs.clone();
            let full = EdgeAccumulator::from_slice(&seq);
            prop_assert!(full.m2 >= 0.0);
        }
    }
}
