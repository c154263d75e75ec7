// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use super::spearman::average_ranks;
use super::special::normal_sf;
use super::{TestMethod, TestResult};
use crate::error::{contract_err, Result};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Combined sample size up to which tie-free inputs get an exact p-value.
pub const EXACT_LIMIT: usize = 12;

/// Mann-Whitney U test, two-sided. The statistic is `U_x`, the number of
/// `(x, y)` pairs with `x > y`, ties counting one half.
///
/// Without ties and with `nx + ny ≤ 12` the p-value is exact:
/// `min(1, 2·min(P(U ≤ u), P(U ≥ u)))` under the permutation null. Otherwise
/// a normal approximation with tie and continuity corrections is used.
pub fn mann_whitney(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(contract_err!("Mann-Whitney needs two non-empty samples"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(contract_err!("Mann-Whitney input contains NaN"));
    }
    let (nx, ny) = (xs.len(), ys.len());
    let n = nx + ny;
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..nx].iter().sum();
    let u = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }

    if n <= EXACT_LIMIT && tie_term == 0.0 {
        let counts = u_distribution(nx, ny);
        let total: u64 = counts.iter().sum();
        let u_int = u as usize;
        let lower: u64 = counts[..=u_int].iter().sum();
        let upper: u64 = counts[u_int..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
        return Ok(TestResult { statistic: u, p_value: p, method: TestMethod::MannWhitneyExact });
    }

    let (nxf, nyf, nf) = (nx as f64, ny as f64, n as f64);
    let mu = nxf * nyf / 2.0;
    let var = nxf * nyf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * normal_sf(z)).min(1.0)
    };
    Ok(TestResult { statistic: u, p_value: p, method: TestMethod::MannWhitneyNormal })
}

/// `counts[u]` = number of the `C(m+n, m)` labelings with `U_x = u`, via the
/// recurrence `f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u)`.
fn u_distribution(m: usize, n: usize) -> Vec<u64> {
    let max_u = m * n;
    // table[j][i] holds the distribution for (i x-values, j y-values).
    let mut table: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for j in 0..=n {
        for i in 0..=m {
            let mut dist = vec![0u64; i * j + 1];
            if i == 0 || j == 0 {
                dist[0] = 1;
            } else {
                // Largest value is an x (beats all j y's) or a y (adds nothing).
                for (u, c) in table[j][i - 1].iter().enumerate() {
                    dist[u + j] += c;
                }
                for (u, c) in table[j - 1][i].iter().enumerate() {
                    dist[u] += c;
                }
            }
            table[j][i] = dist;
        }
    }
    let out = core::mem::take(&mut table[n][m]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}
