// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use super::CircuitGraph;
use crate::error::{config_err, Result};
use crate::feature::FeatureId;
use crate::model::{forward_clean, CellBatch, LayeredModel};
use crate::sae::SparseCode;
use crate::tracer::SaeSet;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmiEdge {
    pub source: FeatureId,
    pub target: FeatureId,
    pub pmi: f64,
    pub joint_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmiConfig {
    /// `(source layer, target layer)` pairs, source before target.
    pub layer_pairs: Vec<(usize, usize)>,
    /// Emit pairs with PMI strictly above this many bits.
    pub threshold: f64,
    pub min_support: u64,
    /// Restrict sources to these features; all features when `None`.
    pub sources: Option<Vec<FeatureId>>,
}

impl Default for PmiConfig {
    fn default() -> Self {
        Self { layer_pairs: Vec::new(), threshold: 0.0, min_support: 5, sources: None }
    }
}

/// Co-activation PMI between features at two layers. A feature is active
/// at a position when it is in that position's TopK code; probabilities are
/// position frequencies over all real positions of the batch.
pub fn pmi_graph(
    model: &LayeredModel,
    saes: &SaeSet,
    batch: &CellBatch,
    cfg: &PmiConfig,
) -> Result<Vec<PmiEdge>> {
    batch.validate()?;
    let mut layers = BTreeSet::new();
    for &(s, t) in &cfg.layer_pairs {
        if s >= t || t >= model.n_layers {
            return Err(config_err!("invalid PMI layer pair ({s}, {t})"));
        }
        for l in [s, t] {
            if saes.get(l).is_none() {
                return Err(config_err!("no SAE at layer {l}"));
            }
            layers.insert(l);
        }
    }
    let width = |l: usize| saes.get(l).map_or(0, |s| s.n_features);

    let mut marginal: Vec<Vec<u64>> = (0..model.n_layers).map(|l| vec![0; if layers.contains(&l) { width(l) } else { 0 }]).collect();
    let mut joint: Vec<Vec<u64>> = cfg.layer_pairs.iter().map(|&(s, t)| vec![0; width(s) * width(t)]).collect();
    let mut n_positions: u64 = 0;
    let mut codes: Vec<SparseCode> = vec![SparseCode::default(); model.n_layers];
    let mut scratch = Vec::new();

    for cell in &batch.cells {
        let states = forward_clean(model, cell)?;
        for p in (0..cell.tokens.len()).filter(|&p| !cell.padding[p]) {
            n_positions += 1;
            for &l in &layers {
                let sae = saes.get(l).expect("checked");
                scratch.resize(sae.n_features, 0.0);
                sae.encode_with(states[l].position(p), &mut scratch, &mut codes[l]);
                for &i in &codes[l].indices {
                    marginal[l][i as usize] += 1;
                }
            }
            for (counts, &(s, t)) in joint.iter_mut().zip(&cfg.layer_pairs) {
                let w = width(t);
                for &i in &codes[s].indices {
                    for &j in &codes[t].indices {
                        counts[i as usize * w + j as usize] += 1;
                    }
                }
            }
        }
    }

    let allowed = |f: FeatureId| cfg.sources.as_ref().is_none_or(|s| s.contains(&f));
    let n = n_positions as f64;
    let mut out = Vec::new();
    for (counts, &(s, t)) in joint.iter().zip(&cfg.layer_pairs) {
        let w = width(t);
        for i in 0..width(s) {
            let source = FeatureId::new(s, i);
            let ci = marginal[s][i];
            if ci == 0 || !allowed(source) {
                continue;
            }
            for j in 0..w {
                let (cj, cij) = (marginal[t][j], counts[i * w + j]);
                if cj == 0 || cij < cfg.min_support.max(1) {
                    continue;
                }
                let pmi = (cij as f64 * n / (ci as f64 * cj as f64)).log2();
                if pmi > cfg.threshold {
                    out.push(PmiEdge { source, target: FeatureId::new(t, j), pmi, joint_count: cij });
                }
            }
        }
    }
    Ok(out)
}

/// `|causal targets ∩ PMI targets| / |causal targets|` at one layer pair;
/// `None` when the causal graph has no targets there.
pub fn target_overlap(causal: &CircuitGraph, pmi: &[PmiEdge], layer_pair: (usize, usize)) -> Option<f64> {
    let (s, t) = layer_pair;
    let causal_targets: BTreeSet<FeatureId> = causal.edges_between(s, t).map(|e| e.target).collect();
    if causal_targets.is_empty() {
        return None;
    }
    let pmi_targets: BTreeSet<FeatureId> =
        pmi.iter().filter(|e| e.source.layer == s && e.target.layer == t).map(|e| e.target).collect();
    Some(causal_targets.intersection(&pmi_targets).count() as f64 / causal_targets.len() as f64)
}
