// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::CircuitGraph;
use crate::error::{contract_err, Result};
use crate::tracer::{CausalEdge, EdgeSign};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttenuationPoint {
    pub target_layer: usize,
    pub offset: usize,
    /// Significant edges into `target_layer` per traced source feature.
    pub value: f64,
}

/// Mean significant edges per source feature at each downstream layer.
/// `n_sources` is the number of traced sources at `source_layer`.
pub fn attenuation_curve(
    g: &CircuitGraph,
    source_layer: usize,
    n_sources: usize,
    target_layers: &[usize],
) -> Result<Vec<AttenuationPoint>> {
    if n_sources == 0 {
        return Err(contract_err!("no traced sources at layer {source_layer}"));
    }
    target_layers
        .iter()
        .map(|&t| {
            if t <= source_layer {
                return Err(contract_err!("target layer {t} is not downstream of {source_layer}"));
            }
            let count = g.edges_between(source_layer, t).count();
            Ok(AttenuationPoint { target_layer: t, offset: t - source_layer, value: count as f64 / n_sources as f64 })
        })
        .collect()
}

/// Distinct target feature indices (pooled over layers) over `n_features`.
pub fn target_coverage(g: &CircuitGraph, n_features: usize) -> f64 {
    if n_features == 0 {
        return 0.0;
    }
    let distinct: BTreeSet<usize> = g.edges().iter().map(|e| e.target.index).collect();
    distinct.len() as f64 / n_features as f64
}

/// Effect-size summary of an edge table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeSummary {
    pub n_edges: usize,
    /// Edges whose d is the zero-variance `±inf` sentinel.
    pub n_infinite: usize,
    /// Mean and median `|d|` over finite edges.
    pub mean_abs_d: Option<f64>,
    pub median_abs_d: Option<f64>,
    /// Percentages over all edges; sentinels count as large.
    pub pct_abs_d_gt_1: Option<f64>,
    pub pct_abs_d_gt_2: Option<f64>,
    pub pct_inhibitory: Option<f64>,
}

pub fn edge_summary(edges: &[CausalEdge]) -> EdgeSummary {
    let n = edges.len();
    let mut finite: Vec<f64> = edges.iter().map(|e| e.d.abs()).filter(|d| d.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let mean = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    let median = match finite.len() {
        0 => None,
        m if m % 2 == 1 => Some(finite[m / 2]),
        m => Some(0.5 * (finite[m / 2 - 1] + finite[m / 2])),
    };
    let pct = |count: usize| (n > 0).then(|| 100.0 * count as f64 / n as f64);
    EdgeSummary {
        n_edges: n,
        n_infinite: n - finite.len(),
        mean_abs_d: mean,
        median_abs_d: median,
        pct_abs_d_gt_1: pct(edges.iter().filter(|e| e.d.abs() > 1.0).count()),
        pct_abs_d_gt_2: pct(edges.iter().filter(|e| e.d.abs() > 2.0).count()),
        pct_inhibitory: pct(edges.iter().filter(|e| e.sign == EdgeSign::Inhibitory).count()),
    }
}
