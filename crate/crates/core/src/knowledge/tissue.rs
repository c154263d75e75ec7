// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::domains::DomainKey;
use crate::stats::{fisher_exact, Table2x2};

/// Case-insensitive substring match of any keyword within `label`.
pub fn matches_keyword<S: AsRef<str>>(label: &str, keywords: &[S]) -> bool {
    let label = label.to_lowercase();
    keywords.iter().any(|k| {
        let k = k.as_ref().to_lowercase();
        !k.is_empty() && label.contains(&k)
    })
}

/// Splits `pairs` into those absent from and present in `reference`.
pub fn split_specific(
    pairs: &BTreeSet<DomainKey>,
    reference: &BTreeSet<DomainKey>,
) -> (Vec<DomainKey>, Vec<DomainKey>) {
    pairs.iter().cloned().partition(|p| !reference.contains(p))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TissueEnrichment {
    pub tissue: String,
    pub specific_related: u64,
    pub specific_unrelated: u64,
    pub shared_related: u64,
    pub shared_unrelated: u64,
    pub odds_ratio: f64,
    pub p_value: f64,
}

/// Per tissue, Fisher's exact test of {specific, shared} × {related,
/// unrelated}, where a pair is related when either domain label matches one
/// of the tissue's keywords.
pub fn tissue_enrichment(
    specific: &[DomainKey],
    shared: &[DomainKey],
    keywords: &BTreeMap<String, Vec<String>>,
) -> Vec<TissueEnrichment> {
    keywords
        .iter()
        .map(|(tissue, kws)| {
            let related = |p: &&DomainKey| matches_keyword(&p.0, kws) || matches_keyword(&p.1, kws);
            let sr = specific.iter().filter(related).count() as u64;
            let hr = shared.iter().filter(related).count() as u64;
            let table = Table2x2 { a: sr, b: specific.len() as u64 - sr, c: hr, d: shared.len() as u64 - hr };
            let test = fisher_exact(&table);
            TissueEnrichment {
                tissue: tissue.clone(),
                specific_related: table.a,
                specific_unrelated: table.b,
                shared_related: table.c,
                shared_unrelated: table.d,
                odds_ratio: table.odds_ratio(),
                p_value: test.p_value,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn keyword_matching() {
        assert!(matches_keyword("Immune Response", &["immune"]));
        assert!(!matches_keyword("DNA Repair", &["immune"]));
        assert!(matches_keyword("DNA repair", &["REPAIR"]));
    }

    fn pairs(related: usize, unrelated: usize) -> Vec<DomainKey> {
        (0..related)
            .map(|i| (format!("immune response {i}"), "x".to_string()))
            .chain((0..unrelated).map(|i| (format!("translation {i}"), "y".to_string())))
            .collect()
    }

    #[test]
    fn odds_ratio_and_null() {
        let mut kw = BTreeMap::new();
        kw.insert("immune".to_string(), vec!["immune".to_string()]);
        let r = tissue_enrichment(&pairs(10, 90), &pairs(5, 195), &kw);
        assert!((r[0].odds_ratio - 10.0 * 195.0 / (90.0 * 5.0)).abs() < 1e-12);
        assert!((r[0].odds_ratio - 4.33).abs() < 0.005);
        let r = tissue_enrichment(&pairs(10, 90), &pairs(10, 90), &kw);
        assert_eq!(r[0].odds_ratio, 1.0);
        assert!(r[0].p_value > 0.99);
    }

    #[test]
    fn split() {
        let a: BTreeSet<DomainKey> = [("a", "b"), ("c", "d")].iter().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        let b: BTreeSet<DomainKey> = [("a", "b")].iter().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        let (spec, shared) = split_specific(&a, &b);
        assert_eq!(spec.len(), 1);
        assert_eq!(shared.len(), 1);
    }
}
