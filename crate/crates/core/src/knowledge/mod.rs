// SPDX-License-Identifier: MIT OR Apache-2.0

//! Annotation-driven analysis of circuit graphs.

mod catalog;
mod coherence;
mod consensus;
pub(crate) mod domains;
mod hierarchy;
mod known;
mod tissue;

pub use catalog::{Annotation, AnnotationCatalog, FeatureAnnotations, Ontology};
pub use coherence::{coherence_fraction, Coherence};
pub use consensus::{
    consensus_pairs, group_by_model, ConsensusPair, ConsensusResult, ModelPairStats,
    HIGH_CONFIDENCE_ABS_D,
};
pub use domains::{domain_pairs, DomainKey, DomainPair, DomainPairTable};
pub use hierarchy::{feedback_loops, process_hierarchy, DomainLevel, PairDelta, ProcessHierarchy};
pub use known::{build_known_graph, novel_pairs, KnownBiologyGraph, NoveltyResult, KNOWN_LINK_MIN_SHARED};
pub use tissue::{matches_keyword, split_specific, tissue_enrichment, TissueEnrichment};
