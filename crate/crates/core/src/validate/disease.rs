// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::knowledge::{matches_keyword, DomainKey, DomainPairTable};
use crate::stats::{fisher_exact, mann_whitney, Table2x2, TestResult};

/// Disease categories with their keywords and the domains they match.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiseaseGeneSets {
    pub categories: BTreeMap<String, (Vec<String>, BTreeSet<String>)>,
}

impl DiseaseGeneSets {
    /// Matches every domain label against each category's keywords.
    pub fn build<'a>(keywords: &BTreeMap<String, Vec<String>>, domains: impl IntoIterator<Item = &'a str>) -> Self {
        let domains: BTreeSet<&str> = domains.into_iter().collect();
        let categories = keywords
            .iter()
            .map(|(cat, kws)| {
                let matched = domains.iter().filter(|d| matches_keyword(d, kws)).map(|d| String::from(*d)).collect();
                (cat.clone(), (kws.clone(), matched))
            })
            .collect();
        Self { categories }
    }

    pub fn disease_domains(&self) -> BTreeSet<&str> {
        self.categories.values().flat_map(|(_, d)| d.iter().map(String::as_str)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiseaseRow {
    pub category: String,
    pub domains: usize,
    /// Edges with either endpoint in a matched domain.
    pub edges: usize,
    /// Consensus domain pairs touching a matched domain.
    pub consensus: usize,
    /// `None` without edges.
    pub mean_abs_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseMap {
    pub rows: Vec<DiseaseRow>,
    pub disease_centrality: Vec<f64>,
    pub other_centrality: Vec<f64>,
    /// Disease against other domain centralities; `None` when a side is empty.
    pub centrality_test: Option<TestResult>,
    /// `[[disease ∧ consensus, disease ∧ ¬consensus], [other ∧ consensus, other ∧ ¬consensus]]` over domain pairs.
    pub consensus_table: Table2x2,
    /// Consensus fraction among disease pairs over that among other pairs.
    pub consensus_enrichment: Option<f64>,
    pub consensus_p: f64,
}

/// Per-category circuit footprint, centrality of disease domains and
/// consensus enrichment among disease-touching domain pairs.
pub fn disease_map(table: &DomainPairTable, sets: &DiseaseGeneSets, consensus: &BTreeSet<DomainKey>) -> DiseaseMap {
    let touches = |p: &crate::knowledge::DomainPair, ds: &BTreeSet<String>| ds.contains(&p.source) || ds.contains(&p.target);
    let rows = sets
        .categories
        .iter()
        .map(|(cat, (_, ds))| {
            let (mut edges, mut sum_abs_d, mut n_consensus) = (0usize, 0.0, 0usize);
            for p in table.iter().filter(|p| touches(p, ds)) {
                edges += p.support;
                sum_abs_d += p.sum_abs_d;
                n_consensus += consensus.contains(&p.key()) as usize;
            }
            DiseaseRow {
                category: cat.clone(),
                domains: ds.len(),
                edges,
                consensus: n_consensus,
                mean_abs_d: (edges > 0).then(|| sum_abs_d / edges as f64),
            }
        })
        .collect();

    let mut centrality: BTreeMap<&str, usize> = BTreeMap::new();
    for p in table.iter() {
        *centrality.entry(&p.source).or_default() += p.support;
        if p.target != p.source {
            *centrality.entry(&p.target).or_default() += p.support;
        }
    }
    let disease = sets.disease_domains();
    let (mut disease_centrality, mut other_centrality) = (Vec::new(), Vec::new());
    for (d, c) in &centrality {
        if disease.contains(d) { &mut disease_centrality } else { &mut other_centrality }.push(*c as f64);
    }
    let centrality_test = mann_whitney(&disease_centrality, &other_centrality).ok();

    let mut t = Table2x2::default();
    for p in table.iter() {
        let is_disease = disease.contains(p.source.as_str()) || disease.contains(p.target.as_str());
        match (is_disease, consensus.contains(&p.key())) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    let consensus_enrichment = (t.a + t.b > 0 && t.c > 0)
        .then(|| (t.a as f64 / (t.a + t.b) as f64) / (t.c as f64 / (t.c + t.d) as f64));
    DiseaseMap {
        rows,
        disease_centrality,
        other_centrality,
        centrality_test,
        consensus_table: t,
        consensus_enrichment,
        consensus_p: fisher_exact(&t).p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::edge;
    use crate::graph::{CircuitGraph, Condition};
    use crate::knowledge::domain_pairs;
    use crate::knowledge::domains::tests::catalog;
    use alloc::string::ToString;
    use alloc::vec;

    fn kw(cat: &str, words: &[&str]) -> BTreeMap<String, Vec<String>> {
        let mut m = BTreeMap::new();
        m.insert(cat.to_string(), words.iter().map(|s| s.to_string()).collect());
        m
    }

    #[test]
    fn keyword_matches_domain() {
        let s = DiseaseGeneSets::build(&kw("cancer", &["repair"]), ["DNA repair", "translation"]);
        let (_, ds) = &s.categories["cancer"];
        assert_eq!(ds.iter().collect::<Vec<_>>(), vec!["DNA repair"]);
    }

    #[test]
    fn rows_and_equal_fractions() {
        // A→B, A→C, D→B, D→C; disease domain A; consensus A→B and D→B.
        let c = catalog(&[((0, 0), "A"), ((0, 1), "D"), ((1, 0), "B"), ((1, 1), "C")]);
        let g = CircuitGraph::from_edges(
            Condition::new("m", "s", "c"),
            [edge((0, 0), (1, 0), -1.0), edge((0, 0), (1, 1), -3.0), edge((0, 1), (1, 0), -1.0), edge((0, 1), (1, 1), -1.0)],
        );
        let table = domain_pairs(&g, &c);
        let sets = DiseaseGeneSets::build(&kw("x", &["a"]), ["A", "B", "C", "D"]);
        let consensus: BTreeSet<DomainKey> = [("A", "B"), ("D", "B")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let m = disease_map(&table, &sets, &consensus);
        assert_eq!(m.rows[0].domains, 1);
        assert_eq!(m.rows[0].edges, 2);
        assert_eq!(m.rows[0].consensus, 1);
        assert_eq!(m.rows[0].mean_abs_d, Some(2.0));
        assert_eq!(m.consensus_enrichment, Some(1.0));
        assert_eq!(m.disease_centrality, vec![2.0]);
        assert_eq!(m.other_centrality.len(), 3);
    }
}
