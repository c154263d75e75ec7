// SPDX-License-Identifier: MIT OR Apache-2.0

//! Causal circuit tracing.
//!
//! For every cell the clean forward pass runs once. Each selected source
//! feature is then zeroed at its layer, the model is replayed from the
//! ablated state, and every downstream SAE feature receives the per-cell
//! delta `mean over real positions of (enc(h_abl) - enc(h_clean))`. Deltas
//! stream into one [`EdgeAccumulator`] per (source, target) pair and become
//! edges when `|d|` and sign consistency both clear their thresholds.

mod ablate;
mod engine;
mod fingerprint;
mod select;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

pub use ablate::ablate_at_layer;
pub use engine::{
    finalize_edges, run_trace, trace_source_feature, LayerPlan, LayerReport, PassCounts,
    SourceBlock, TargetBlock, TraceCheckpoint, TraceHooks, TraceOutput, TracePlan, TraceReport,
    TraceRun, TraceState, Tracer,
};
pub use fingerprint::{hash_batch, hash_model, hash_sae};
pub use select::{select_sources, SourceSelection};

use crate::error::{config_err, Result};
use crate::feature::FeatureId;
use crate::sae::SaeDictionary;
use crate::stats::{EdgeAccumulator, EdgeStats};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceConfig {
    pub source_layers: Vec<usize>,
    pub sources_per_layer: usize,
    pub n_cells: usize,
    pub d_threshold: f64,
    pub consistency_threshold: f64,
    pub checkpoint_every: usize,
    pub deterministic: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            source_layers: Vec::new(),
            sources_per_layer: 30,
            n_cells: 200,
            d_threshold: 0.5,
            consistency_threshold: 0.7,
            checkpoint_every: 50,
            deterministic: true,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_threshold > 0.0 && self.d_threshold.is_finite()) {
            return Err(config_err!("d_threshold must be positive, got {}", self.d_threshold));
        }
        if !(self.consistency_threshold > 0.0 && self.consistency_threshold.is_finite()) {
            return Err(config_err!(
                "consistency_threshold must be positive, got {}",
                self.consistency_threshold
            ));
        }
        if self.checkpoint_every == 0 {
            return Err(config_err!("checkpoint_every must be at least 1"));
        }
        if self.n_cells == 0 {
            return Err(config_err!("n_cells must be at least 1"));
        }
        let mut layers = self.source_layers.clone();
        layers.sort_unstable();
        if layers.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err!("source_layers contains duplicates"));
        }
        Ok(())
    }

    /// Significance rule: both thresholds are strict.
    pub fn classify(&self, stats: &EdgeStats) -> Option<EdgeSign> {
        if stats.d.abs() > self.d_threshold && stats.consistency > self.consistency_threshold {
            Some(if stats.d < 0.0 { EdgeSign::Inhibitory } else { EdgeSign::Excitatory })
        } else {
            None
        }
    }
}

/// Inhibitory: ablating the source lowers the target (negative d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EdgeSign {
    Inhibitory,
    Excitatory,
}

impl EdgeSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeSign::Inhibitory => "inhibitory",
            EdgeSign::Excitatory => "excitatory",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inhibitory" => Some(EdgeSign::Inhibitory),
            "excitatory" => Some(EdgeSign::Excitatory),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CausalEdge {
    pub source: FeatureId,
    pub target: FeatureId,
    pub d: f64,
    pub consistency: f64,
    pub n: u64,
    pub sign: EdgeSign,
}

impl CausalEdge {
    pub fn abs_d(&self) -> f64 {
        self.d.abs()
    }

    pub fn layer_offset(&self) -> usize {
        self.target.layer - self.source.layer
    }
}

/// SAE dictionaries keyed by layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaeSet {
    by_layer: BTreeMap<usize, SaeDictionary>,
}

impl SaeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sae: SaeDictionary) -> Option<SaeDictionary> {
        self.by_layer.insert(sae.layer, sae)
    }

    pub fn get(&self, layer: usize) -> Option<&SaeDictionary> {
        self.by_layer.get(&layer)
    }

    pub fn layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_layer.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SaeDictionary> {
        self.by_layer.values()
    }

    pub fn len(&self) -> usize {
        self.by_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_layer.is_empty()
    }
}

impl FromIterator<SaeDictionary> for SaeSet {
    fn from_iter<I: IntoIterator<Item = SaeDictionary>>(iter: I) -> Self {
        let mut set = SaeSet::new();
        for sae in iter {
            set.insert(sae);
        }
        set
    }
}

/// Accumulator helper shared by the engine and its tests.
pub(crate) fn zeroed(n: usize) -> Vec<EdgeAccumulator> {
    alloc::vec![EdgeAccumulator::new(); n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(d: f64, consistency: f64) -> EdgeStats {
        EdgeStats { d, consistency, n: 200 }
    }

    #[test]
    fn strict_thresholds() {
        let cfg = TraceConfig::default();
        assert_eq!(cfg.classify(&stats(-0.92, 0.9)), Some(EdgeSign::Inhibitory));
        assert_eq!(cfg.classify(&stats(0.6, 0.71)), Some(EdgeSign::Excitatory));
        assert_eq!(cfg.classify(&stats(0.4, 0.99)), None);
        assert_eq!(cfg.classify(&stats(0.6, 0.70)), None);
        assert_eq!(cfg.classify(&stats(0.5, 0.99)), None);
        assert_eq!(cfg.classify(&stats(-0.5, 0.99)), None);
        assert_eq!(cfg.classify(&stats(f64::NEG_INFINITY, 1.0)), Some(EdgeSign::Inhibitory));
    }

    #[test]
    fn config_validation() {
        assert!(TraceConfig::default().validate().is_ok());
        let bad = TraceConfig { checkpoint_every: 0, ..TraceConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TraceConfig { d_threshold: 0.0, ..TraceConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TraceConfig { source_layers: alloc::vec![1, 1], ..TraceConfig::default() };
        assert!(bad.validate().is_err());
    }
}

#[cfg(test)]
mod engine_tests;
