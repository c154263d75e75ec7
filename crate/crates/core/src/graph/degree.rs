// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::CircuitGraph;
use crate::feature::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DegreeStats {
    pub degrees: BTreeMap<FeatureId, Degree>,
    /// Nodes with out-degree > 0, highest first.
    pub out_hubs: Vec<(FeatureId, usize)>,
    /// Nodes with in-degree > 0, highest first.
    pub in_hubs: Vec<(FeatureId, usize)>,
}

fn ranked(mut v: Vec<(FeatureId, usize)>) -> Vec<(FeatureId, usize)> {
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.index.cmp(&b.0.index)).then(a.0.layer.cmp(&b.0.layer)));
    v
}

/// Out-degree counts targets per source; in-degree counts distinct sources
/// per target. Hub ties resolve toward the lower feature index.
pub fn degree_stats(g: &CircuitGraph) -> DegreeStats {
    let mut degrees: BTreeMap<FeatureId, Degree> = BTreeMap::new();
    for e in g.edges() {
        degrees.entry(e.source).or_default().out_degree += 1;
        degrees.entry(e.target).or_default().in_degree += 1;
    }
    let out_hubs = ranked(degrees.iter().filter(|(_, d)| d.out_degree > 0).map(|(f, d)| (*f, d.out_degree)).collect());
    let in_hubs = ranked(degrees.iter().filter(|(_, d)| d.in_degree > 0).map(|(f, d)| (*f, d.in_degree)).collect());
    DegreeStats { degrees, out_hubs, in_hubs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::edge;
    use crate::graph::Condition;

    #[test]
    fn small_graph() {
        let g = CircuitGraph::from_edges(
            Condition::default(),
            [edge((0, 1), (1, 1), -1.0), edge((0, 1), (1, 2), -1.0), edge((0, 2), (1, 1), -1.0)],
        );
        let s = degree_stats(&g);
        assert_eq!(s.degrees[&FeatureId::new(0, 1)].out_degree, 2);
        assert_eq!(s.degrees[&FeatureId::new(1, 1)].in_degree, 2);
        assert_eq!(s.out_hubs[0], (FeatureId::new(0, 1), 2));
        assert_eq!(s.in_hubs, [(FeatureId::new(1, 1), 2), (FeatureId::new(1, 2), 1)]);
        let total_out: usize = s.degrees.values().map(|d| d.out_degree).sum();
        let total_in: usize = s.degrees.values().map(|d| d.in_degree).sum();
        assert_eq!((total_out, total_in), (3, 3));
    }

    #[test]
    fn ties_by_index() {
        let g = CircuitGraph::from_edges(
            Condition::default(),
            [edge((0, 9), (1, 1), -1.0), edge((0, 3), (1, 1), -1.0)],
        );
        let s = degree_stats(&g);
        assert_eq!(s.out_hubs[0].0, FeatureId::new(0, 3));
        assert!(degree_stats(&CircuitGraph::default()).degrees.is_empty());
    }
}
