// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{contract_err, Error, Result};
use crate::feature::FeatureId;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Annotation sources recognised by the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Ontology {
    GoBp,
    Kegg,
    Reactome,
    String,
    Trrust,
}

impl Ontology {
    pub const ALL: [Ontology; 5] =
        [Ontology::GoBp, Ontology::Kegg, Ontology::Reactome, Ontology::String, Ontology::Trrust];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ontology::GoBp => "GO-BP",
            Ontology::Kegg => "KEGG",
            Ontology::Reactome => "Reactome",
            Ontology::String => "STRING",
            Ontology::Trrust => "TRRUST",
        }
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ontology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ontology::ALL
            .into_iter()
            .find(|o| o.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| contract_err!("unknown ontology {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub ontology: Ontology,
    pub term: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureAnnotations {
    pub annotations: Vec<Annotation>,
    /// Gene symbols in rank order (index 0 is rank 1).
    pub genes: Vec<String>,
}

/// Per-feature enrichment terms and ranked gene lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationCatalog {
    features: BTreeMap<FeatureId, FeatureAnnotations>,
}

impl AnnotationCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_annotation(
        &mut self,
        feature: FeatureId,
        ontology: Ontology,
        term: impl Into<String>,
        p_value: f64,
    ) -> Result<()> {
        if !(p_value > 0.0 && p_value <= 1.0) {
            return Err(contract_err!("p-value {p_value} for {feature} outside (0, 1]"));
        }
        self.features.entry(feature).or_default().annotations.push(Annotation {
            ontology,
            term: term.into(),
            p_value,
        });
        Ok(())
    }

    /// Sets a feature's ranked genes from `(rank, gene)` rows; ranks must be
    /// exactly `1..=n` in any order.
    pub fn set_genes(&mut self, feature: FeatureId, mut ranked: Vec<(usize, String)>) -> Result<()> {
        ranked.sort_by_key(|r| r.0);
        if ranked.iter().enumerate().any(|(i, (rank, _))| *rank != i + 1) {
            return Err(contract_err!("gene ranks for {feature} are not contiguous from 1"));
        }
        self.features.entry(feature).or_default().genes = ranked.into_iter().map(|r| r.1).collect();
        Ok(())
    }

    pub fn get(&self, feature: &FeatureId) -> Option<&FeatureAnnotations> {
        self.features.get(feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &FeatureAnnotations)> {
        self.features.iter()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn is_annotated(&self, feature: &FeatureId) -> bool {
        self.features.get(feature).is_some_and(|f| !f.annotations.is_empty())
    }

    /// Σ −log10(p) over the feature's enrichments; 0 when unannotated.
    pub fn annotation_score(&self, feature: &FeatureId) -> f64 {
        self.features
            .get(feature)
            .map(|f| f.annotations.iter().map(|a| -a.p_value.log10()).sum())
            .unwrap_or(0.0)
    }

    /// GO-BP term with the smallest p-value (ties: lexicographically first).
    pub fn primary_domain(&self, feature: &FeatureId) -> Option<&str> {
        self.features.get(feature).and_then(|f| {
            f.annotations
                .iter()
                .filter(|a| a.ontology == Ontology::GoBp)
                .min_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.term.cmp(&b.term)))
                .map(|a| a.term.as_str())
        })
    }

    /// Sorted, de-duplicated `(ontology, term)` set of a feature.
    pub fn term_set(&self, feature: &FeatureId) -> Vec<(Ontology, &str)> {
        let mut terms: Vec<(Ontology, &str)> = self
            .features
            .get(feature)
            .map(|f| f.annotations.iter().map(|a| (a.ontology, a.term.as_str())).collect())
            .unwrap_or_default();
        terms.sort_unstable();
        terms.dedup();
        terms
    }

    pub fn genes(&self, feature: &FeatureId) -> &[String] {
        self.features.get(feature).map(|f| f.genes.as_slice()).unwrap_or(&[])
    }

    /// Annotated features at `layer`, in index order.
    pub fn annotated_at(&self, layer: usize) -> impl Iterator<Item = FeatureId> + '_ {
        self.features
            .iter()
            .filter(move |(f, a)| f.layer == layer && !a.annotations.is_empty())
            .map(|(f, _)| *f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn scores_and_domains() {
        let mut c = AnnotationCatalog::new();
        let f = FeatureId::new(0, 4);
        c.add_annotation(f, Ontology::GoBp, "DNA repair", 1e-4).unwrap();
        c.add_annotation(f, Ontology::Kegg, "hsa03430", 1e-2).unwrap();
        c.add_annotation(f, Ontology::GoBp, "cell cycle", 1e-3).unwrap();
        assert!((c.annotation_score(&f) - 9.0).abs() < 1e-12);
        assert_eq!(c.primary_domain(&f), Some("DNA repair"));
        assert_eq!(c.annotation_score(&FeatureId::new(0, 5)), 0.0);
        assert!(c.add_annotation(f, Ontology::GoBp, "x", 0.0).is_err());
        assert!(c.add_annotation(f, Ontology::GoBp, "x", 1.5).is_err());
    }

    #[test]
    fn gene_ranks_must_be_contiguous() {
        let mut c = AnnotationCatalog::new();
        let f = FeatureId::new(1, 0);
        c.set_genes(f, vec![(2, "B".to_string()), (1, "A".to_string())]).unwrap();
        assert_eq!(c.genes(&f), ["A", "B"]);
        assert!(c.set_genes(f, vec![(1, "A".to_string()), (3, "C".to_string())]).is_err());
    }

    #[test]
    fn ontology_names() {
        for o in Ontology::ALL {
            assert_eq!(o.as_str().parse::<Ontology>().unwrap(), o);
        }
        assert_eq!("go-bp".parse::<Ontology>().unwrap(), Ontology::GoBp);
        assert!("GO-CC".parse::<Ontology>().is_err());
    }
}
