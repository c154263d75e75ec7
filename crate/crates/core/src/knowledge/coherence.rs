// SPDX-License-Identifier: MIT OR Apache-2.0

use super::AnnotationCatalog;
use crate::tracer::CausalEdge;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coherence {
    /// Shared-term edges over annotated edges; `None` without annotated edges.
    pub fraction: Option<f64>,
    /// Edges whose endpoints both carry at least one annotation.
    pub annotated_edges: usize,
    pub shared_edges: usize,
}

/// Fraction of annotated edges whose endpoints share at least one
/// (ontology, term) annotation.
pub fn coherence_fraction(edges: &[CausalEdge], catalog: &AnnotationCatalog) -> Coherence {
    let (mut annotated, mut shared) = (0, 0);
    for e in edges {
        if !catalog.is_annotated(&e.source) || !catalog.is_annotated(&e.target) {
            continue;
        }
        annotated += 1;
        let a = catalog.term_set(&e.source);
        let b = catalog.term_set(&e.target);
        // Both lists are sorted; walk them together.
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    shared += 1;
                    break;
                }
            }
        }
    }
    Coherence {
        fraction: (annotated > 0).then(|| shared as f64 / annotated as f64),
        annotated_edges: annotated,
        shared_edges: shared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::FeatureId;
    use crate::graph::tests::edge;
    use crate::knowledge::Ontology;
    use alloc::vec;

    #[test]
    fn half_shared() {
        let mut c = AnnotationCatalog::new();
        let f = |l, i| FeatureId::new(l, i);
        c.add_annotation(f(0, 0), Ontology::GoBp, "A", 0.01).unwrap();
        c.add_annotation(f(1, 0), Ontology::GoBp, "A", 0.01).unwrap();
        c.add_annotation(f(1, 0), Ontology::Kegg, "B", 0.01).unwrap();
        c.add_annotation(f(0, 1), Ontology::GoBp, "A", 0.01).unwrap();
        c.add_annotation(f(1, 1), Ontology::Kegg, "B", 0.01).unwrap();
        let edges = vec![edge((0, 0), (1, 0), -1.0), edge((0, 1), (1, 1), -1.0), edge((0, 2), (1, 1), -1.0)];
        let r = coherence_fraction(&edges, &c);
        assert_eq!(r.fraction, Some(0.5));
        assert_eq!(r.annotated_edges, 2);

        // Same term name under different ontologies does not count.
        c.add_annotation(f(2, 0), Ontology::Kegg, "A", 0.01).unwrap();
        let r = coherence_fraction(&[edge((0, 1), (2, 0), -1.0)], &c);
        assert_eq!(r.fraction, Some(0.0));
        assert_eq!(coherence_fraction(&[edge((3, 0), (4, 0), -1.0)], &c).fraction, None);
    }
}
