// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::AnnotationCatalog;
use crate::graph::{CircuitGraph, Condition};

pub type DomainKey = (String, String);

/// Aggregate of all annotated edges from one source domain to one target
/// domain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainPair {
    pub source: String,
    pub target: String,
    pub support: usize,
    pub sum_abs_d: f64,
    pub sum_source_layer: f64,
    pub sum_layer_delta: f64,
    pub conditions: BTreeSet<Condition>,
}

impl DomainPair {
    pub fn key(&self) -> DomainKey {
        (self.source.clone(), self.target.clone())
    }

    pub fn mean_abs_d(&self) -> f64 {
        self.sum_abs_d / self.support as f64
    }

    pub fn mean_source_layer(&self) -> f64 {
        self.sum_source_layer / self.support as f64
    }

    /// Mean `target layer − source layer`.
    pub fn mean_layer_delta(&self) -> f64 {
        self.sum_layer_delta / self.support as f64
    }

    fn absorb(&mut self, other: &DomainPair) {
        self.support += other.support;
        self.sum_abs_d += other.sum_abs_d;
        self.sum_source_layer += other.sum_source_layer;
        self.sum_layer_delta += other.sum_layer_delta;
        self.conditions.extend(other.conditions.iter().cloned());
    }
}

/// Domain pairs of one or more conditions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DomainPairTable {
    pub pairs: BTreeMap<DomainKey, DomainPair>,
    /// Edges seen, annotated or not.
    pub total_edges: usize,
    /// Edges with a primary domain at both endpoints.
    pub annotated_edges: usize,
}

impl DomainPairTable {
    pub fn annotation_rate(&self) -> Option<f64> {
        (self.total_edges > 0).then(|| self.annotated_edges as f64 / self.total_edges as f64)
    }

    pub fn merge(&mut self, other: &DomainPairTable) {
        self.total_edges += other.total_edges;
        self.annotated_edges += other.annotated_edges;
        for (k, p) in &other.pairs {
            match self.pairs.get_mut(k) {
                Some(mine) => mine.absorb(p),
                None => {
                    self.pairs.insert(k.clone(), p.clone());
                }
            }
        }
    }

    pub fn merged<'a>(tables: impl IntoIterator<Item = &'a DomainPairTable>) -> DomainPairTable {
        let mut out = DomainPairTable::default();
        tables.into_iter().for_each(|t| out.merge(t));
        out
    }

    pub fn keys(&self) -> BTreeSet<DomainKey> {
        self.pairs.keys().cloned().collect()
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.pairs.values().flat_map(|p| p.conditions.iter().map(|c| c.model.clone())).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DomainPair> {
        self.pairs.values()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Maps every edge with primary domains at both endpoints onto its
/// (source domain, target domain) pair.
pub fn domain_pairs(g: &CircuitGraph, catalog: &AnnotationCatalog) -> DomainPairTable {
    let mut table = DomainPairTable { total_edges: g.len(), ..DomainPairTable::default() };
    for e in g.edges() {
        let (Some(s), Some(t)) = (catalog.primary_domain(&e.source), catalog.primary_domain(&e.target)) else {
            continue;
        };
        table.annotated_edges += 1;
        let pair = table.pairs.entry((s.to_string(), t.to_string())).or_insert_with(|| DomainPair {
            source: s.to_string(),
            target: t.to_string(),
            support: 0,
            sum_abs_d: 0.0,
            sum_source_layer: 0.0,
            sum_layer_delta: 0.0,
            conditions: BTreeSet::new(),
        });
        pair.support += 1;
        pair.sum_abs_d += e.d.abs();
        pair.sum_source_layer += e.source.layer as f64;
        pair.sum_layer_delta += e.layer_offset() as f64;
        pair.conditions.insert(g.condition.clone());
    }
    table
}

/// The table's distinct `(source id, target id)` pairs, with ids indexing
/// into `labels`.
pub(crate) fn pair_ids(table: &DomainPairTable, labels: &[String]) -> Vec<(u32, u32)> {
    let id = |l: &String| labels.binary_search(l).expect("label present") as u32;
    table.pairs.values().map(|p| (id(&p.source), id(&p.target))).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::feature::FeatureId;
    use crate::graph::tests::edge;
    use crate::knowledge::Ontology;

    pub(crate) fn catalog(domains: &[((usize, usize), &str)]) -> AnnotationCatalog {
        let mut c = AnnotationCatalog::new();
        for ((l, i), d) in domains {
            c.add_annotation(FeatureId::new(*l, *i), Ontology::GoBp, *d, 1e-3).unwrap();
        }
        c
    }

    #[test]
    fn aggregates_support_and_mean() {
        let c = catalog(&[((0, 0), "A"), ((1, 0), "B"), ((0, 1), "A"), ((2, 1), "B")]);
        let g = CircuitGraph::from_edges(
            Condition::new("m", "s", "c"),
            [edge((0, 0), (1, 0), -1.0), edge((0, 1), (2, 1), 3.0), edge((0, 0), (1, 5), -2.0)],
        );
        let t = domain_pairs(&g, &c);
        assert_eq!(t.total_edges, 3);
        assert_eq!(t.annotated_edges, 2);
        let p = &t.pairs[&("A".to_string(), "B".to_string())];
        assert_eq!(p.support, 2);
        assert_eq!(p.mean_abs_d(), 2.0);
        assert_eq!(p.mean_layer_delta(), 1.5);
        assert_eq!(p.mean_source_layer(), 0.0);
        let supported: usize = t.iter().map(|p| p.support).sum();
        assert_eq!(supported, t.annotated_edges);
    }
}
