// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec::Vec;

use crate::feature::FeatureId;
use crate::knowledge::AnnotationCatalog;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSelection {
    pub layer: usize,
    pub requested: usize,
    /// Selected features, highest score first.
    pub features: Vec<FeatureId>,
}

impl SourceSelection {
    /// True when fewer annotated features existed than were requested.
    pub fn is_short(&self) -> bool {
        self.features.len() < self.requested
    }
}

/// Top `n` annotated features at `layer` by Σ −log10(p), ties toward the
/// lower feature index. Unannotated features are never selected.
pub fn select_sources(catalog: &AnnotationCatalog, layer: usize, n: usize) -> SourceSelection {
    let mut scored: Vec<(f64, FeatureId)> =
        catalog.annotated_at(layer).map(|f| (catalog.annotation_score(&f), f)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.index.cmp(&b.1.index)));
    scored.truncate(n);
    SourceSelection { layer, requested: n, features: scored.into_iter().map(|s| s.1).collect() }
}
