// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{config_err, Result};
use crate::rng::{seeded, ChaCha8Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PermutationResult {
    pub observed: f64,
    /// Mean of the permuted statistics.
    pub expected: f64,
    /// `observed / expected`; `+inf` when `expected` is 0.
    pub fold: f64,
    /// `(1 + #{permuted ≥ observed}) / (1 + n_perms)`, never 0.
    pub p_value: f64,
    pub n_perms: usize,
}

/// One-sided permutation test for enrichment.
///
/// `sampler` draws one statistic under a fresh label permutation using the
/// supplied RNG, which is seeded from `seed`.
pub fn permutation_enrichment<F>(
    observed: f64,
    n_perms: usize,
    seed: u64,
    mut sampler: F,
) -> Result<PermutationResult>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    if n_perms == 0 {
        return Err(config_err!("permutation test needs at least one permutation"));
    }
    let mut rng = seeded(seed, 0x9e3);
    let mut sum = 0.0;
    let mut at_least = 0usize;
    for _ in 0..n_perms {
        let s = sampler(&mut rng);
        sum += s;
        if s >= observed {
            at_least += 1;
        }
    }
    let expected = sum / n_perms as f64;
    let fold = if expected == 0.0 { f64::INFINITY } else { observed / expected };
    Ok(PermutationResult {
        observed,
        expected,
        fold,
        p_value: (1 + at_least) as f64 / (1 + n_perms) as f64,
        n_perms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn extreme_observation() {
        let r = permutation_enrichment(100.0, 1000, 1, |rng| rng.random_range(0.0..10.0)).unwrap();
        assert_eq!(r.p_value, 1.0 / 1001.0);
        assert!(r.fold > 1.0);
    }

    #[test]
    fn median_observation() {
        let r = permutation_enrichment(0.5, 4000, 2, |rng| rng.random::<f64>()).unwrap();
        assert!((r.p_value - 0.5).abs() < 0.03, "{}", r.p_value);
        assert!((r.expected - 0.5).abs() < 0.02);
    }

    #[test]
    fn zero_expectation_and_errors() {
        let r = permutation_enrichment(3.0, 10, 3, |_| 0.0).unwrap();
        assert_eq!(r.fold, f64::INFINITY);
        assert!(permutation_enrichment(1.0, 0, 3, |_| 0.0).is_err());
    }
}
