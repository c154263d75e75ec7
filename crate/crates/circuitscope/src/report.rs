// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-condition run reports and the Table-1-shaped summary CSV.

use circuitscope_core::graph::{edge_summary, target_coverage, CircuitGraph, Condition, EdgeSummary};
use circuitscope_core::knowledge::{coherence_fraction, AnnotationCatalog, Coherence};
use circuitscope_core::tracer::{CausalEdge, LayerReport, TraceReport};
use serde::{Deserialize, Serialize};

use crate::tables::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub condition: Condition,
    pub seed: u64,
    pub config_hash: String,
    pub n_cells: usize,
    pub cells_done: usize,
    pub layers: Vec<LayerReport>,
    pub passes_planned: u64,
    pub passes_completed: u64,
    pub n_features: usize,
    pub summary: EdgeSummary,
    /// Distinct target indices over `n_features`.
    pub coverage: f64,
    pub coherence: Coherence,
    /// Percentage of annotated edges sharing an annotation.
    pub shared_ontology_pct: Option<f64>,
}

/// Builds a report from an edge table; pass counts and timings come from
/// the tracer's own report, per-layer edge counts are recounted.
pub fn build_run_report(
    condition: &Condition,
    seed: u64,
    trace: &TraceReport,
    edges: &[CausalEdge],
    catalog: &AnnotationCatalog,
    n_features: usize,
) -> RunReport {
    let layers: Vec<LayerReport> = trace
        .layers
        .iter()
        .map(|l| {
            let count = edges.iter().filter(|e| e.source.layer == l.source_layer).count();
            LayerReport {
                edges: count,
                edges_per_source_mean: if l.n_sources == 0 { 0.0 } else { count as f64 / l.n_sources as f64 },
                ..l.clone()
            }
        })
        .collect();
    let graph = CircuitGraph::from_edges(condition.clone(), edges.iter().copied());
    let coherence = coherence_fraction(edges, catalog);
    RunReport {
        condition: condition.clone(),
        seed,
        config_hash: format!("{:016x}", trace.config_hash),
        n_cells: trace.n_cells,
        cells_done: trace.cells_done,
        passes_planned: layers.iter().map(|l| l.passes_planned).sum(),
        passes_completed: layers.iter().map(|l| l.passes_completed).sum(),
        layers,
        n_features,
        summary: edge_summary(edges),
        coverage: target_coverage(&graph, n_features),
        shared_ontology_pct: coherence.fraction.map(|f| 100.0 * f),
        coherence,
    }
}

pub const TABLE1_HEADER: [&str; 15] = [
    "condition",
    "model",
    "sae",
    "cells",
    "n_cells",
    "passes",
    "edges",
    "mean_abs_d",
    "median_abs_d",
    "pct_abs_d_gt_1",
    "pct_abs_d_gt_2",
    "inhibitory_pct",
    "shared_ontology_pct",
    "coverage",
    "config_hash",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn table1(reports: &[RunReport]) -> Table {
    let mut t = Table::new(&TABLE1_HEADER);
    if let Some(seed) = reports.first().map(|r| r.seed) {
        t = t.with_meta("seed", seed);
    }
    for r in reports {
        t.push(vec![
            r.condition.to_string(),
            r.condition.model.clone(),
            r.condition.sae.clone(),
            r.condition.cells.clone(),
            r.n_cells.to_string(),
            r.passes_completed.to_string(),
            r.summary.n_edges.to_string(),
            opt(r.summary.mean_abs_d),
            opt(r.summary.median_abs_d),
            opt(r.summary.pct_abs_d_gt_1),
            opt(r.summary.pct_abs_d_gt_2),
            opt(r.summary.pct_inhibitory),
            opt(r.shared_ontology_pct),
            r.coverage.to_string(),
            r.config_hash.clone(),
        ]);
    }
    t
}
