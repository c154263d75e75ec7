// SPDX-License-Identifier: MIT OR Apache-2.0

//! Streaming and exact statistics.

mod fisher;
mod mann_whitney;
mod permutation;
pub mod special;
mod spearman;
mod welford;

pub use fisher::{fisher_exact, fisher_exact_ratio, Table2x2};
pub use mann_whitney::{mann_whitney, EXACT_LIMIT};
pub use permutation::{permutation_enrichment, PermutationResult};
pub use spearman::{average_ranks, spearman};
pub use welford::{EdgeAccumulator, EdgeStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TestMethod {
    FisherExact,
    MannWhitneyExact,
    MannWhitneyNormal,
    /// Student-t approximation for a rank correlation.
    SpearmanT,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestResult {
    pub statistic: f64,
    /// Always in `[0, 1]`.
    pub p_value: f64,
    pub method: TestMethod,
}
