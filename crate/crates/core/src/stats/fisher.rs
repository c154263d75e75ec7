// SPDX-License-Identifier: MIT OR Apache-2.0

use super::special::ln_gamma;
use super::{TestMethod, TestResult};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// 2×2 contingency table `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub const fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// `ad / bc`; `+inf` when `bc = 0 < ad`, NaN when both products are 0.
    pub fn odds_ratio(&self) -> f64 {
        let ad = self.a as f64 * self.d as f64;
        let bc = self.b as f64 * self.c as f64;
        if bc == 0.0 {
            if ad > 0.0 {
                f64::INFINITY
            } else {
                f64::NAN
            }
        } else {
            ad / bc
        }
    }

    /// Support of the first cell given the margins, and the margins
    /// `(row1, row2, col1)`.
    fn support(&self) -> (u64, u64, u64, u64, u64) {
        let r1 = self.a + self.b;
        let r2 = self.c + self.d;
        let c1 = self.a + self.c;
        let lo = c1.saturating_sub(r2);
        let hi = r1.min(c1);
        (lo, hi, r1, r2, c1)
    }
}

/// Tables are compared with this relative slack so floating-point ties count
/// as "at most as probable as observed".
const REL_SLACK: f64 = 1e-7;
/// Largest table total for the exact integer path (C(100, 50)·10^7 < 2^128).
const EXACT_MAX_TOTAL: u64 = 100;

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Two-sided p-value as an exact ratio `(numerator, denominator)` of
/// hypergeometric counts, for tables with total ≤ 100.
///
/// A table counts toward the p-value when its probability is at most the
/// observed one times `1 + 1e-7`, evaluated in integer arithmetic.
pub fn fisher_exact_ratio(t: &Table2x2) -> Option<(u128, u128)> {
    let n = t.total();
    if n > EXACT_MAX_TOTAL {
        return None;
    }
    let (lo, hi, r1, r2, c1) = t.support();
    let weight = |x: u64| binomial(r1, x) * binomial(r2, c1 - x);
    let observed = weight(t.a);
    const SCALE: u128 = 10_000_000; // 1 / REL_SLACK
    let numerator = (lo..=hi)
        .map(weight)
        .filter(|&w| w * SCALE <= observed * (SCALE + 1))
        .sum();
    Some((numerator, binomial(n, c1)))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Fisher's exact test, two-sided. The statistic is the odds ratio.
pub fn fisher_exact(t: &Table2x2) -> TestResult {
    let p = if t.total() == 0 {
        1.0
    } else if let Some((num, den)) = fisher_exact_ratio(t) {
        num as f64 / den as f64
    } else {
        let (lo, hi, r1, r2, c1) = t.support();
        let n = t.total();
        let ln_den = ln_choose(n, c1);
        let ln_p = |x: u64| ln_choose(r1, x) + ln_choose(r2, c1 - x) - ln_den;
        let observed = ln_p(t.a);
        let cutoff = observed + REL_SLACK.ln_1p();
        (lo..=hi).map(ln_p).filter(|&lp| lp <= cutoff).map(f64::exp).sum()
    };
    TestResult {
        statistic: t.odds_ratio(),
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::FisherExact,
    }
}
