// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gene-level predictions and their validation against perturbation screens
//! and disease gene sets.

mod disease;
mod genepairs;
mod perturb;

pub use disease::{disease_map, DiseaseGeneSets, DiseaseMap, DiseaseRow};
pub use genepairs::{
    apply_consensus, extract_gene_pairs, filter_predictions, merge_gene_pairs, GenePairPrediction, RawGenePair,
    RawGenePairs, DEFAULT_TOP_N, FILTER_MAX_ABS_D, FILTER_MIN_EDGES,
};
pub use perturb::{
    magnitude_correlation, per_source_enrichment, sign_accuracy, PerturbationRow,
    PerturbationTable, SignAccuracy, SourceEnrichment, SourceEnrichmentSummary,
    DEFAULT_LFC_THRESHOLD,
};
