// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::domains::{DomainKey, DomainPairTable};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainLevel {
    pub domain: String,
    /// Mean source layer over the domain's outgoing edges.
    pub mean_source_layer: f64,
    pub out_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairDelta {
    pub source: String,
    pub target: String,
    pub mean_layer_delta: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProcessHierarchy {
    pub domains: Vec<DomainLevel>,
    pub pairs: Vec<PairDelta>,
}

pub fn process_hierarchy(table: &DomainPairTable) -> ProcessHierarchy {
    let mut by_domain: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for p in table.iter() {
        let e = by_domain.entry(&p.source).or_default();
        e.0 += p.sum_source_layer;
        e.1 += p.support;
    }
    let domains = by_domain
        .into_iter()
        .map(|(d, (sum, n))| DomainLevel { domain: d.into(), mean_source_layer: sum / n as f64, out_edges: n })
        .collect();
    let pairs = table
        .iter()
        .map(|p| PairDelta {
            source: p.source.clone(),
            target: p.target.clone(),
            mean_layer_delta: p.mean_layer_delta(),
            support: p.support,
        })
        .collect();
    ProcessHierarchy { domains, pairs }
}

/// Reciprocal pairs `A ↔ B` with `A < B`; self-pairs are not loops.
pub fn feedback_loops(table: &DomainPairTable) -> Vec<DomainKey> {
    table
        .pairs
        .keys()
        .filter(|(a, b)| a < b && table.pairs.contains_key(&(b.clone(), a.clone())))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::edge;
    use crate::graph::{CircuitGraph, Condition};
    use crate::knowledge::domain_pairs;
    use crate::knowledge::domains::tests::catalog;

    #[test]
    fn layers_and_deltas() {
        let c = catalog(&[((0, 0), "A"), ((1, 1), "A"), ((7, 0), "B"), ((9, 0), "B")]);
        let g = CircuitGraph::from_edges(
            Condition::default(),
            [edge((0, 0), (7, 0), -1.0), edge((1, 1), (9, 0), -1.0)],
        );
        let h = process_hierarchy(&domain_pairs(&g, &c));
        assert_eq!(h.domains[0].mean_source_layer, 0.5);
        assert_eq!(h.pairs[0].mean_layer_delta, 7.5);
    }

    #[test]
    fn loops() {
        let c = catalog(&[((0, 0), "A"), ((1, 0), "B"), ((0, 1), "B"), ((1, 1), "A"), ((0, 2), "A"), ((1, 2), "A")]);
        let one_way = CircuitGraph::from_edges(Condition::default(), [edge((0, 0), (1, 0), -1.0)]);
        assert!(feedback_loops(&domain_pairs(&one_way, &c)).is_empty());
        let both = CircuitGraph::from_edges(
            Condition::default(),
            [edge((0, 0), (1, 0), -1.0), edge((0, 1), (1, 1), -1.0), edge((0, 2), (1, 2), -1.0)],
        );
        let l = feedback_loops(&domain_pairs(&both, &c));
        assert_eq!(l.len(), 1);
        assert_eq!((l[0].0.as_str(), l[0].1.as_str()), ("A", "B"));
    }
}
