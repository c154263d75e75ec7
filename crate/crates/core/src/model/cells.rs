// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic cell batches.
//!
//! Cells are rank-value encoded: each cell lists distinct tokens (genes) in
//! descending order of a positive expression value, then pads to `seq_len`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, Result};
use crate::rng::{normal_f64, seeded, ChaCha8Rng};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Token id used at padded positions.
pub const PAD_TOKEN: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CellKind {
    /// One homogeneous population.
    K562Like,
    /// Three latent tissue clusters with distinct token and value distributions.
    MultiTissueLike,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub tokens: Vec<u32>,
    pub values: Vec<f32>,
    /// `true` exactly at padded positions.
    pub padding: Vec<bool>,
    /// Latent cluster (tissue) label; 0 for homogeneous batches.
    pub cluster: u16,
}

impl Cell {
    pub fn n_real(&self) -> usize {
        self.padding.iter().filter(|p| !**p).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellBatch {
    pub seq_len: usize,
    pub cells: Vec<Cell>,
}

impl CellBatch {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Checks the batch invariants: shared `seq_len`, mask/pad agreement,
    /// finite values, at least one real position per cell.
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            if c.tokens.len() != self.seq_len
                || c.values.len() != self.seq_len
                || c.padding.len() != self.seq_len
            {
                return Err(config_err!("cell {i} is not padded to seq_len {}", self.seq_len));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(config_err!("cell {i} has non-finite values"));
            }
            if c.n_real() == 0 {
                return Err(config_err!("cell {i} has no unpadded positions"));
            }
        }
        Ok(())
    }

    /// Cells `start..end` as a new batch (used for chunked processing).
    pub fn slice(&self, start: usize, end: usize) -> CellBatch {
        CellBatch { seq_len: self.seq_len, cells: self.cells[start..end].to_vec() }
    }
}

/// Number of latent clusters in a multi-tissue-like batch.
pub const TISSUE_CLUSTERS: usize = 3;

/// Deterministic synthetic batch. Token 0 is reserved for padding, so real
/// tokens are drawn from `1..vocab`.
pub fn generate_cells(
    seed: u64,
    n_cells: usize,
    seq_len: usize,
    vocab: usize,
    kind: CellKind,
) -> Result<CellBatch> {
    if n_cells == 0 {
        return Err(config_err!("n_cells must be at least 1"));
    }
    if seq_len == 0 {
        return Err(config_err!("seq_len must be at least 1"));
    }
    if vocab < 2 {
        return Err(config_err!("vocab must include padding plus at least one token"));
    }
    let mut rng = seeded(seed, 0xce11);
    let n_clusters = match kind {
        CellKind::K562Like => 1,
        CellKind::MultiTissueLike => TISSUE_CLUSTERS,
    };
    let sizes = cluster_sizes(n_cells, n_clusters);
    let real_tokens = vocab - 1;

    // Each cluster up-weights its own third of the vocabulary and shifts the
    // log-expression mean.
    let weights: Vec<Vec<f64>> = (0..n_clusters)
        .map(|c| {
            (0..real_tokens)
                .map(|t| if n_clusters > 1 && t % n_clusters == c { 4.0 } else { 1.0 })
                .collect()
        })
        .collect();

    let mut cells = Vec::with_capacity(n_cells);
    for (cluster, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let lo = (seq_len * 3).div_ceil(4).max(1);
            let n_real = rng.random_range(lo..=seq_len);
            let picks = weighted_distinct(&mut rng, &weights[cluster], n_real);
            let shift = 0.25 * cluster as f64;
            let mut values: Vec<f32> = (0..picks.len())
                .map(|_| (shift + 0.5 * normal_f64(&mut rng)).exp() as f32)
                .collect();
            values.sort_by(|a, b| b.total_cmp(a));

            let mut tokens = vec![PAD_TOKEN; seq_len];
            let mut vals = vec![0.0f32; seq_len];
            let mut padding = vec![true; seq_len];
            for (p, (&tok, &v)) in picks.iter().zip(&values).enumerate() {
                tokens[p] = tok as u32 + 1;
                vals[p] = v;
                padding[p] = false;
            }
            cells.push(Cell { tokens, values: vals, padding, cluster: cluster as u16 });
        }
    }
    Ok(CellBatch { seq_len, cells })
}

/// Near-equal split with the remainder going to the first clusters.
pub fn cluster_sizes(n: usize, clusters: usize) -> Vec<usize> {
    (0..clusters).map(|c| n / clusters + usize::from(c < n % clusters)).collect()
}

/// `n` indices drawn without replacement with probability proportional to
/// weight (exponential-key method); with replacement once the pool runs out.
fn weighted_distinct(rng: &mut ChaCha8Rng, weights: &[f64], n: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (-u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keyed.iter().take(n).map(|&(_, i)| i).collect();
    while out.len() < n {
        out.push(rng.random_range(0..weights.len()));
    }
    out
}
