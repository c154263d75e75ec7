// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::domains::{pair_ids, DomainKey, DomainPairTable};
use crate::error::{config_err, Result};
use crate::rng::shuffle;
use crate::stats::{permutation_enrichment, PermutationResult};

/// Per-model mean `|d|` above which a consensus pair is high-confidence.
pub const HIGH_CONFIDENCE_ABS_D: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelPairStats {
    pub model: String,
    pub support: usize,
    pub mean_abs_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsensusPair {
    pub source: String,
    pub target: String,
    /// One entry per model, in model order.
    pub per_model: Vec<ModelPairStats>,
    pub high_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub models: Vec<String>,
    pub pairs: Vec<ConsensusPair>,
    pub n_high_confidence: usize,
    pub enrichment: PermutationResult,
}

impl ConsensusResult {
    pub fn keys(&self) -> alloc::collections::BTreeSet<DomainKey> {
        self.pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect()
    }
}

/// Groups condition tables by model; each table must belong to one model.
pub fn group_by_model(tables: &[DomainPairTable]) -> Result<BTreeMap<String, DomainPairTable>> {
    let mut groups: BTreeMap<String, DomainPairTable> = BTreeMap::new();
    for t in tables {
        let models = t.models();
        if models.len() > 1 {
            return Err(config_err!("a domain-pair table mixes models {models:?}"));
        }
        if let Some(m) = models.into_iter().next() {
            groups.entry(m).or_default().merge(t);
        }
    }
    Ok(groups)
}

/// Domain pairs found in at least one condition of every model, with a
/// permutation test of the consensus count. Each permutation relabels every
/// model's target domains through an independent random bijection of the
/// domain vocabulary, holding sources fixed, so each model keeps its number
/// of distinct pairs and its degree structure.
pub fn consensus_pairs(tables: &[DomainPairTable], n_perms: usize, seed: u64) -> Result<ConsensusResult> {
    let groups = group_by_model(tables)?;
    if groups.len() < 2 {
        return Err(config_err!("consensus needs at least two models, got {}", groups.len()));
    }
    let models: Vec<String> = groups.keys().cloned().collect();
    let tables: Vec<&DomainPairTable> = groups.values().collect();

    let mut pairs = Vec::new();
    for (key, first) in &tables[0].pairs {
        let mut per_model = Vec::with_capacity(models.len());
        for (m, t) in models.iter().zip(&tables) {
            match t.pairs.get(key) {
                Some(p) => per_model.push(ModelPairStats { model: m.clone(), support: p.support, mean_abs_d: p.mean_abs_d() }),
                None => break,
            }
        }
        if per_model.len() == models.len() {
            let high_confidence = per_model.iter().all(|s| s.mean_abs_d > HIGH_CONFIDENCE_ABS_D);
            pairs.push(ConsensusPair { source: first.source.clone(), target: first.target.clone(), per_model, high_confidence });
        }
    }
    let n_high_confidence = pairs.iter().filter(|p| p.high_confidence).count();

    let mut labels: Vec<String> = tables.iter().flat_map(|t| t.pairs.keys().flat_map(|(s, t)| [s.clone(), t.clone()])).collect();
    labels.sort_unstable();
    labels.dedup();
    let lists: Vec<Vec<(u32, u32)>> = tables.iter().map(|t| pair_ids(t, &labels)).collect();
    let mut work = lists.clone();
    let mut relabel: Vec<u32> = (0..labels.len() as u32).collect();
    let enrichment = permutation_enrichment(pairs.len() as f64, n_perms, seed, |rng| {
        for (w, l) in work.iter_mut().zip(&lists) {
            shuffle(rng, &mut relabel);
            w.clear();
            w.extend(l.iter().map(|&(s, t)| (s, relabel[t as usize])));
            w.sort_unstable();
        }
        count_common(&work) as f64
    })?;
    Ok(ConsensusResult { models, pairs, n_high_confidence, enrichment })
}

/// Size of the intersection of sorted lists without repeats.
fn count_common(lists: &[Vec<(u32, u32)>]) -> usize {
    let (first, rest) = lists.split_first().expect("at least two models");
    first.iter().filter(|x| rest.iter().all(|l| l.binary_search(x).is_ok())).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CircuitGraph, Condition};
    use crate::graph::tests::edge;
    use crate::knowledge::domain_pairs;
    use crate::knowledge::domains::tests::catalog;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn basic_consensus_and_confidence() {
        let c = catalog(&[((0, 0), "A"), ((1, 0), "B"), ((0, 1), "C"), ((1, 1), "D")]);
        let gf = CircuitGraph::from_edges(Condition::new("gf", "k", "k"), [edge((0, 0), (1, 0), -1.2), edge((0, 1), (1, 1), -2.0)]);
        let sc = CircuitGraph::from_edges(Condition::new("sc", "k", "k"), [edge((0, 0), (1, 0), -1.1)]);
        let r = consensus_pairs(&[domain_pairs(&gf, &c), domain_pairs(&sc, &c)], 50, 1).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!((r.pairs[0].source.as_str(), r.pairs[0].target.as_str()), ("A", "B"));
        assert!(r.pairs[0].high_confidence);
        assert_eq!(r.n_high_confidence, 1);
        assert!(r.enrichment.p_value > 0.0);

        assert!(consensus_pairs(&[domain_pairs(&gf, &c)], 10, 1).is_err());
    }

    #[test]
    fn adding_a_condition_never_shrinks_consensus() {
        let c = catalog(&[((0, 0), "A"), ((1, 0), "B"), ((0, 1), "C"), ((1, 1), "D")]);
        let g1 = CircuitGraph::from_edges(Condition::new("gf", "k", "k"), [edge((0, 0), (1, 0), -1.0), edge((0, 1), (1, 1), -1.0)]);
        let s1 = CircuitGraph::from_edges(Condition::new("sc", "k", "k"), [edge((0, 0), (1, 0), -1.0)]);
        let s2 = CircuitGraph::from_edges(Condition::new("sc", "t", "t"), [edge((0, 1), (1, 1), -1.0)]);
        let t = |g: &CircuitGraph| domain_pairs(g, &c);
        let before = consensus_pairs(&[t(&g1), t(&s1)], 10, 1).unwrap().keys();
        let after = consensus_pairs(&[t(&g1), t(&s1), t(&s2)], 10, 1).unwrap().keys();
        assert!(before.is_subset(&after));
        assert_eq!(after.len(), 2);
        assert!(after.contains(&("C".to_string(), "D".to_string())));
    }

    #[test]
    fn mixed_model_table_rejected() {
        let c = catalog(&[((0, 0), "A"), ((1, 0), "B")]);
        let mut t = domain_pairs(&CircuitGraph::from_edges(Condition::new("gf", "k", "k"), [edge((0, 0), (1, 0), -1.0)]), &c);
        t.merge(&domain_pairs(&CircuitGraph::from_edges(Condition::new("sc", "k", "k"), [edge((0, 0), (1, 0), -1.0)]), &c));
        assert!(consensus_pairs(&[t.clone(), t], 10, 1).is_err());
        let _ = vec![0];
    }
}
