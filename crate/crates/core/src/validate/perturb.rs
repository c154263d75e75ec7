// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::GenePairPrediction;
use crate::error::{contract_err, Error, Result};
use crate::stats::{fisher_exact, spearman, Table2x2, TestResult};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Default `|LFC|` above which a response gene counts as responsive.
pub const DEFAULT_LFC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationRow {
    pub perturbed_gene: String,
    pub response_gene: String,
    pub lfc: f64,
}

/// Log-fold changes keyed by `(perturbed gene, response gene)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationTable {
    lfc: BTreeMap<(String, String), f64>,
}

impl PerturbationTable {
    /// Rejects non-finite LFCs and repeated gene pairs.
    pub fn new(rows: impl IntoIterator<Item = PerturbationRow>) -> Result<Self> {
        let mut lfc = BTreeMap::new();
        for r in rows {
            if !r.lfc.is_finite() {
                return Err(contract_err!("non-finite LFC for {} -> {}", r.perturbed_gene, r.response_gene));
            }
            let key = (r.perturbed_gene, r.response_gene);
            if lfc.insert(key.clone(), r.lfc).is_some() {
                return Err(contract_err!("duplicate perturbation row {} -> {}", key.0, key.1));
            }
        }
        Ok(Self { lfc })
    }

    pub fn get(&self, perturbed: &str, response: &str) -> Option<f64> {
        self.lfc.get(&(String::from(perturbed), String::from(response))).copied()
    }

    /// Measured response genes of one perturbation, in name order.
    pub fn responses<'a>(&'a self, perturbed: &'a str) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        self.lfc
            .range((String::from(perturbed), String::new())..)
            .take_while(move |((p, _), _)| p == perturbed)
            .map(|((_, r), v)| (r.as_str(), *v))
    }

    pub fn rows(&self) -> impl Iterator<Item = PerturbationRow> + '_ {
        self.lfc.iter().map(|((p, r), v)| PerturbationRow { perturbed_gene: p.clone(), response_gene: r.clone(), lfc: *v })
    }

    pub fn len(&self) -> usize {
        self.lfc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lfc.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignAccuracy {
    /// `None` when every overlapping pair has `LFC = 0`.
    pub accuracy: Option<f64>,
    pub concordant: usize,
    pub evaluated: usize,
    pub excluded_zero: usize,
    pub overlapping: usize,
}

/// Share of measured predictions whose sign matches `sign(LFC)`.
pub fn sign_accuracy(preds: &[GenePairPrediction], table: &PerturbationTable) -> Result<SignAccuracy> {
    let (mut overlapping, mut excluded_zero, mut concordant) = (0, 0, 0);
    for p in preds {
        let Some(lfc) = table.get(&p.source_gene, &p.target_gene) else { continue };
        overlapping += 1;
        if lfc == 0.0 {
            excluded_zero += 1;
        } else if (lfc > 0.0) == (p.predicted_sign > 0) {
            concordant += 1;
        }
    }
    if overlapping == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let evaluated = overlapping - excluded_zero;
    Ok(SignAccuracy {
        accuracy: (evaluated > 0).then(|| concordant as f64 / evaluated as f64),
        concordant,
        evaluated,
        excluded_zero,
        overlapping,
    })
}

/// Spearman correlation of `weight · |mean d|` with `|LFC|` over measured
/// predictions with a non-zero LFC.
pub fn magnitude_correlation(preds: &[GenePairPrediction], table: &PerturbationTable) -> Result<TestResult> {
    let (mut strength, mut response) = (Vec::new(), Vec::new());
    for p in preds {
        match table.get(&p.source_gene, &p.target_gene) {
            Some(lfc) if lfc != 0.0 => {
                strength.push(p.weight * p.mean_d.abs());
                response.push(lfc.abs());
            }
            _ => {}
        }
    }
    spearman(&strength, &response)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceEnrichment {
    pub source_gene: String,
    /// `[[predicted ∧ responsive, predicted ∧ ¬responsive], [¬predicted ∧ responsive, ¬predicted ∧ ¬responsive]]`
    pub table: Table2x2,
    pub odds_ratio: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceEnrichmentSummary {
    pub sources: Vec<SourceEnrichment>,
    /// Predicted source genes without any measured response.
    pub skipped: usize,
    pub n_significant: usize,
    /// `None` when no source was tested.
    pub fraction_significant: Option<f64>,
    pub alpha: f64,
}

/// Per predicted source gene, Fisher's exact test of predicted targets
/// against responsive genes (`|LFC| > lfc_threshold`) among that source's
/// measured responses. Significance is uncorrected `p < 0.05`.
pub fn per_source_enrichment(
    preds: &[GenePairPrediction],
    table: &PerturbationTable,
    lfc_threshold: f64,
) -> Result<SourceEnrichmentSummary> {
    if !(lfc_threshold >= 0.0 && lfc_threshold.is_finite()) {
        return Err(contract_err!("LFC threshold must be finite and non-negative, got {lfc_threshold}"));
    }
    const ALPHA: f64 = 0.05;
    let mut predicted: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in preds {
        predicted.entry(&p.source_gene).or_default().insert(&p.target_gene);
    }
    let mut sources = Vec::new();
    let mut skipped = 0;
    for (source, targets) in predicted {
        let mut t = Table2x2::default();
        for (response, lfc) in table.responses(source) {
            let responsive = lfc.abs() > lfc_threshold;
            match (targets.contains(response), responsive) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        if t.total() == 0 {
            skipped += 1;
            continue;
        }
        let test = fisher_exact(&t);
        sources.push(SourceEnrichment { source_gene: source.into(), table: t, odds_ratio: t.odds_ratio(), p_value: test.p_value });
    }
    let n_significant = sources.iter().filter(|s| s.p_value < ALPHA).count();
    Ok(SourceEnrichmentSummary {
        fraction_significant: (!sources.is_empty()).then(|| n_significant as f64 / sources.len() as f64),
        sources,
        skipped,
        n_significant,
        alpha: ALPHA,
    })
}
