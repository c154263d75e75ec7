// SPDX-License-Identifier: MIT OR Apache-2.0

//! Circuit graphs built from significant edges, and the statistics reported
//! on them.

mod degree;
mod metrics;
mod pmi;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use degree::{degree_stats, Degree, DegreeStats};
pub use metrics::{attenuation_curve, edge_summary, target_coverage, AttenuationPoint, EdgeSummary};
pub use pmi::{pmi_graph, target_overlap, PmiConfig, PmiEdge};

use crate::error::{contract_err, Error, Result};
use crate::feature::FeatureId;
use crate::tracer::CausalEdge;

/// Identifies one tracing run: which model, which SAE training set, which
/// cells were traced. Displays as `model/sae/cells`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Condition {
    pub model: String,
    pub sae: String,
    pub cells: String,
}

impl Condition {
    pub fn new(model: impl Into<String>, sae: impl Into<String>, cells: impl Into<String>) -> Self {
        Self { model: model.into(), sae: sae.into(), cells: cells.into() }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.model, self.sae, self.cells)
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            [m, a, c] if !m.is_empty() => Ok(Condition::new(*m, *a, *c)),
            _ => Err(contract_err!("condition {s:?} is not model/sae/cells")),
        }
    }
}

/// Union of significant edges for one condition. A repeated (source,
/// target) pair keeps the edge with the larger `|d|`; ties keep the first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitGraph {
    pub condition: Condition,
    edges: Vec<CausalEdge>,
    index: BTreeMap<(FeatureId, FeatureId), usize>,
}

impl CircuitGraph {
    pub fn new(condition: Condition) -> Self {
        Self { condition, ..Self::default() }
    }

    pub fn from_edges(condition: Condition, edges: impl IntoIterator<Item = CausalEdge>) -> Self {
        let mut g = Self::new(condition);
        edges.into_iter().for_each(|e| g.insert(e));
        g
    }

    pub fn insert(&mut self, edge: CausalEdge) {
        match self.index.get(&(edge.source, edge.target)) {
            Some(&i) => {
                if edge.d.abs() > self.edges[i].d.abs() {
                    self.edges[i] = edge;
                }
            }
            None => {
                self.index.insert((edge.source, edge.target), self.edges.len());
                self.edges.push(edge);
            }
        }
    }

    pub fn union(&mut self, other: &CircuitGraph) {
        other.edges.iter().for_each(|e| self.insert(*e));
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[CausalEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, source: FeatureId, target: FeatureId) -> Option<&CausalEdge> {
        self.index.get(&(source, target)).map(|&i| &self.edges[i])
    }

    pub fn nodes(&self) -> BTreeSet<FeatureId> {
        self.edges.iter().flat_map(|e| [e.source, e.target]).collect()
    }

    pub fn sources(&self) -> BTreeSet<FeatureId> {
        self.edges.iter().map(|e| e.source).collect()
    }

    pub fn targets(&self) -> BTreeSet<FeatureId> {
        self.edges.iter().map(|e| e.target).collect()
    }

    pub fn edges_between(&self, source_layer: usize, target_layer: usize) -> impl Iterator<Item = &CausalEdge> {
        self.edges
            .iter()
            .filter(move |e| e.source.layer == source_layer && e.target.layer == target_layer)
    }
}
