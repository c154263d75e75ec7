// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::knowledge::{AnnotationCatalog, DomainKey};
use crate::tracer::CausalEdge;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

pub const DEFAULT_TOP_N: usize = 10;
/// A pair survives filtering with at least this many supporting edges...
pub const FILTER_MIN_EDGES: usize = 2;
/// ...or with some supporting edge stronger than this.
pub const FILTER_MAX_ABS_D: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawGenePair {
    pub weight: f64,
    pub supporting_edges: usize,
    pub max_abs_d: f64,
    /// `d` of the strongest supporting edge.
    pub strongest_d: f64,
    pub signed_d_sum: f64,
    /// Primary-domain pairs of the supporting edges.
    pub domains: BTreeSet<DomainKey>,
}

impl RawGenePair {
    pub fn mean_d(&self) -> f64 {
        self.signed_d_sum / self.supporting_edges as f64
    }

    /// Sign of the mean `d`; the strongest edge decides when the mean is 0
    /// or undefined.
    pub fn predicted_sign(&self) -> i8 {
        let m = self.mean_d();
        if m > 0.0 {
            1
        } else if m < 0.0 {
            -1
        } else if self.strongest_d > 0.0 {
            1
        } else {
            -1
        }
    }
}

pub type RawGenePairs = BTreeMap<(String, String), RawGenePair>;

/// Crosses the top `top_n` genes of each edge's source and target features.
/// A gene pair from ranks `(r, s)` gets weight `1 / (r·s)` per edge.
pub fn extract_gene_pairs(edges: &[CausalEdge], catalog: &AnnotationCatalog, top_n: usize) -> RawGenePairs {
    let mut out = RawGenePairs::new();
    for e in edges {
        let sg = catalog.genes(&e.source);
        let tg = catalog.genes(&e.target);
        let domain = catalog
            .primary_domain(&e.source)
            .zip(catalog.primary_domain(&e.target))
            .map(|(s, t)| (String::from(s), String::from(t)));
        let abs_d = e.d.abs();
        for (i, s) in sg.iter().take(top_n).enumerate() {
            for (j, t) in tg.iter().take(top_n).enumerate() {
                let p = out.entry((s.clone(), t.clone())).or_default();
                p.weight += 1.0 / ((i + 1) * (j + 1)) as f64;
                p.supporting_edges += 1;
                if p.supporting_edges == 1 || abs_d > p.max_abs_d {
                    p.max_abs_d = abs_d;
                    p.strongest_d = e.d;
                }
                p.signed_d_sum += e.d;
                if let Some(k) = &domain {
                    p.domains.insert(k.clone());
                }
            }
        }
    }
    out
}

/// Folds `other` into `into`, as if both edge lists had been extracted
/// together.
pub fn merge_gene_pairs(into: &mut RawGenePairs, other: RawGenePairs) {
    for (k, p) in other {
        let e = into.entry(k).or_default();
        if e.supporting_edges == 0 || p.max_abs_d > e.max_abs_d {
            e.max_abs_d = p.max_abs_d;
            e.strongest_d = p.strongest_d;
        }
        e.weight += p.weight;
        e.supporting_edges += p.supporting_edges;
        e.signed_d_sum += p.signed_d_sum;
        e.domains.extend(p.domains);
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenePairPrediction {
    pub source_gene: String,
    pub target_gene: String,
    pub weight: f64,
    pub supporting_edges: usize,
    pub max_abs_d: f64,
    pub mean_d: f64,
    pub predicted_sign: i8,
    pub consensus: bool,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub domains: BTreeSet<DomainKey>,
}

/// Keeps pairs backed by at least two edges or by one edge with `|d| > 2`.
pub fn filter_predictions(raw: &RawGenePairs) -> Vec<GenePairPrediction> {
    raw.iter()
        .filter(|(_, p)| p.supporting_edges >= FILTER_MIN_EDGES || p.max_abs_d > FILTER_MAX_ABS_D)
        .map(|((s, t), p)| GenePairPrediction {
            source_gene: s.clone(),
            target_gene: t.clone(),
            weight: p.weight,
            supporting_edges: p.supporting_edges,
            max_abs_d: p.max_abs_d,
            mean_d: p.mean_d(),
            predicted_sign: p.predicted_sign(),
            consensus: false,
            domains: p.domains.clone(),
        })
        .collect()
}

/// Flags predictions with a supporting edge in a consensus domain pair.
pub fn apply_consensus(preds: &mut [GenePairPrediction], consensus: &BTreeSet<DomainKey>) {
    for p in preds {
        p.consensus = p.domains.iter().any(|k| consensus.contains(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::FeatureId;
    use crate::graph::tests::edge;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn cat(genes: &[((usize, usize), &[&str])]) -> AnnotationCatalog {
        let mut c = AnnotationCatalog::new();
        for ((l, i), gs) in genes {
            let ranked = gs.iter().enumerate().map(|(r, g)| (r + 1, g.to_string())).collect();
            c.set_genes(FeatureId::new(*l, *i), ranked).unwrap();
        }
        c
    }

    fn key(s: &str, t: &str) -> (String, String) {
        (s.to_string(), t.to_string())
    }

    #[test]
    fn rank_weights() {
        let c = cat(&[((0, 0), &["g1", "g2"]), ((1, 0), &["h1"])]);
        let raw = extract_gene_pairs(&[edge((0, 0), (1, 0), -1.0)], &c, DEFAULT_TOP_N);
        assert_eq!(raw.len(), 2);
        assert_eq!(raw[&key("g1", "h1")].weight, 1.0);
        assert_eq!(raw[&key("g2", "h1")].weight, 0.5);
    }

    #[test]
    fn ten_by_ten_and_accumulation() {
        let names: Vec<String> = (0..12).map(|i| format!("G{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let c = cat(&[((0, 0), &refs), ((1, 0), &refs), ((1, 1), &refs)]);
        let raw = extract_gene_pairs(&[edge((0, 0), (1, 0), -1.0)], &c, DEFAULT_TOP_N);
        assert_eq!(raw.len(), 100);
        let raw = extract_gene_pairs(&[edge((0, 0), (1, 0), -1.0), edge((0, 0), (1, 1), -3.0)], &c, DEFAULT_TOP_N);
        let p = &raw[&key("G0", "G1")];
        assert_eq!(p.supporting_edges, 2);
        assert_eq!(p.weight, 1.0);
        assert_eq!(p.max_abs_d, 3.0);
        assert_eq!(p.mean_d(), -2.0);
    }

    #[test]
    fn merge_matches_joint_extraction() {
        let c = cat(&[((0, 0), &["a", "b"]), ((1, 0), &["x"]), ((1, 1), &["x", "y"])]);
        let e1 = [edge((0, 0), (1, 0), -1.0)];
        let e2 = [edge((0, 0), (1, 1), 2.5)];
        let mut merged = extract_gene_pairs(&e1, &c, DEFAULT_TOP_N);
        merge_gene_pairs(&mut merged, extract_gene_pairs(&e2, &c, DEFAULT_TOP_N));
        let joint = extract_gene_pairs(&[e1[0], e2[0]], &c, DEFAULT_TOP_N);
        assert_eq!(merged, joint);
    }

    #[test]
    fn filter_rule() {
        let mut raw = RawGenePairs::new();
        let mk = |n, d: f64| RawGenePair { weight: 1.0, supporting_edges: n, max_abs_d: d, strongest_d: -d, signed_d_sum: -d * n as f64, domains: BTreeSet::new() };
        raw.insert(key("a", "x"), mk(2, 0.8));
        raw.insert(key("b", "x"), mk(1, 2.5));
        raw.insert(key("c", "x"), mk(1, 1.0));
        raw.insert(key("d", "x"), mk(1, 2.0));
        let kept: Vec<_> = filter_predictions(&raw).into_iter().map(|p| p.source_gene).collect();
        assert_eq!(kept, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn sign_is_weighted_mean() {
        let p = RawGenePair { supporting_edges: 3, signed_d_sum: -1.0 + -1.0 + 1.5, strongest_d: 1.5, max_abs_d: 1.5, ..Default::default() };
        assert_eq!(p.predicted_sign(), -1);
        let p = RawGenePair { supporting_edges: 2, signed_d_sum: 0.0, strongest_d: 1.0, max_abs_d: 1.0, ..Default::default() };
        assert_eq!(p.predicted_sign(), 1);
    }
}
