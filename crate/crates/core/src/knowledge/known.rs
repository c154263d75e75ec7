// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::domains::{DomainKey, DomainPairTable};

/// Minimum shared genes for two domains to count as linked.
pub const KNOWN_LINK_MIN_SHARED: usize = 3;

/// Undirected links between domains that share enough genes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnownBiologyGraph {
    links: BTreeSet<DomainKey>,
}

impl KnownBiologyGraph {
    pub fn linked(&self, a: &str, b: &str) -> bool {
        let key = if a <= b { (String::from(a), String::from(b)) } else { (String::from(b), String::from(a)) };
        self.links.contains(&key)
    }

    /// Links as `(a, b)` with `a ≤ b`.
    pub fn links(&self) -> impl Iterator<Item = &DomainKey> {
        self.links.iter()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Links every pair of domains (a domain with itself included) whose gene
/// sets share at least [`KNOWN_LINK_MIN_SHARED`] genes.
pub fn build_known_graph(domain_genes: &BTreeMap<String, Vec<String>>) -> KnownBiologyGraph {
    let sets: Vec<(&String, BTreeSet<&String>)> =
        domain_genes.iter().map(|(d, g)| (d, g.iter().collect())).collect();
    let mut links = BTreeSet::new();
    for (i, (a, ga)) in sets.iter().enumerate() {
        for (b, gb) in &sets[i..] {
            if ga.intersection(gb).count() >= KNOWN_LINK_MIN_SHARED {
                links.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    KnownBiologyGraph { links }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyResult {
    /// Novel pairs, in key order.
    pub novel: Vec<DomainKey>,
    /// Novel share of distinct pairs; `None` when there are no pairs.
    pub pair_fraction: Option<f64>,
    /// Novel share of supporting edges; `None` when there are no edges.
    pub edge_fraction: Option<f64>,
    /// Novel pairs present in every input condition.
    pub all_conditions: Vec<DomainKey>,
}

/// A pair is novel when its two domains are not linked in `known`.
pub fn novel_pairs(tables: &[DomainPairTable], known: &KnownBiologyGraph) -> NoveltyResult {
    let merged = DomainPairTable::merged(tables);
    let conditions: BTreeSet<_> = merged.iter().flat_map(|p| p.conditions.iter().cloned()).collect();
    let mut novel = Vec::new();
    let mut all_conditions = Vec::new();
    let (mut novel_support, mut total_support) = (0usize, 0usize);
    for p in merged.iter() {
        total_support += p.support;
        if known.linked(&p.source, &p.target) {
            continue;
        }
        novel_support += p.support;
        novel.push(p.key());
        if !conditions.is_empty() && p.conditions == conditions {
            all_conditions.push(p.key());
        }
    }
    NoveltyResult {
        pair_fraction: (!merged.is_empty()).then(|| novel.len() as f64 / merged.len() as f64),
        edge_fraction: (total_support > 0).then(|| novel_support as f64 / total_support as f64),
        novel,
        all_conditions,
    }
}
