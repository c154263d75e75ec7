// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;
use core::ops::ControlFlow;

use fnv::FnvHasher;

use super::ablate::ablate_cached;
use super::fingerprint::{hash_batch, hash_model, hash_sae};
use super::select::select_sources;
use super::{zeroed, CausalEdge, SaeSet, TraceConfig};
use crate::error::{config_err, contract_err, Error, Result};
use crate::feature::FeatureId;
use crate::knowledge::AnnotationCatalog;
use crate::model::{forward_clean, forward_from, Cell, CellBatch, HiddenState, LayeredModel};
use crate::sae::{SaeDictionary, SparseCode};
use crate::stats::EdgeAccumulator;

/// Sources and measured downstream layers for one source layer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerPlan {
    pub layer: usize,
    /// Number of sources asked for; more than `sources.len()` on a shortfall.
    pub requested: usize,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TracePlan {
    pub layers: Vec<LayerPlan>,
}

impl TracePlan {
    /// Selects sources for every configured layer from the catalog.
    pub fn from_catalog(config: &TraceConfig, saes: &SaeSet, catalog: &AnnotationCatalog) -> Self {
        let layers = config
            .source_layers
            .iter()
            .map(|&layer| {
                let sel = select_sources(catalog, layer, config.sources_per_layer);
                LayerPlan {
                    layer,
                    requested: sel.requested,
                    sources: sel.features.iter().map(|f| f.index).collect(),
                    targets: saes.layers().filter(|&t| t > layer).collect(),
                }
            })
            .collect();
        Self { layers }
    }

    /// Plan with explicit source indices per layer.
    pub fn explicit(saes: &SaeSet, sources: Vec<(usize, Vec<usize>)>) -> Self {
        let layers = sources
            .into_iter()
            .map(|(layer, sources)| LayerPlan {
                layer,
                requested: sources.len(),
                sources,
                targets: saes.layers().filter(|&t| t > layer).collect(),
            })
            .collect();
        Self { layers }
    }

    pub fn n_sources(&self) -> usize {
        self.layers.iter().map(|l| l.sources.len()).sum()
    }

    fn validate(&self, model: &LayeredModel, saes: &SaeSet) -> Result<()> {
        for lp in &self.layers {
            let sae = saes
                .get(lp.layer)
                .ok_or_else(|| config_err!("no SAE at source layer {}", lp.layer))?;
            if lp.layer + 1 >= model.n_layers {
                return Err(config_err!(
                    "source layer {} has no downstream layer in a {}-layer model",
                    lp.layer,
                    model.n_layers
                ));
            }
            if lp.targets.is_empty() {
                return Err(config_err!("no SAE downstream of source layer {}", lp.layer));
            }
            if let Some(&f) = lp.sources.iter().find(|&&f| f >= sae.n_features) {
                return Err(contract_err!("source feature {f} outside layer {} dictionary", lp.layer));
            }
            if lp.targets.iter().any(|&t| t <= lp.layer || t >= model.n_layers) {
                return Err(config_err!("invalid target layers for source layer {}", lp.layer));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetBlock {
    pub layer: usize,
    /// One accumulator per feature of the target dictionary.
    pub accumulators: Vec<EdgeAccumulator>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceBlock {
    pub source: FeatureId,
    pub targets: Vec<TargetBlock>,
}

/// Forward-pass bookkeeping for one source layer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassCounts {
    pub source_layer: usize,
    /// Clean plus ablated passes that finished with finite states.
    pub completed: u64,
    /// Cells whose clean pass failed; none of their passes count.
    pub skipped_cells: u64,
    /// Ablated passes that failed in otherwise healthy cells.
    pub skipped_passes: u64,
    pub elapsed_secs: f64,
}

/// Everything a run has accumulated so far.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceState {
    pub cells_done: usize,
    pub blocks: Vec<SourceBlock>,
    pub passes: Vec<PassCounts>,
}

impl TraceState {
    fn same_shape(&self, other: &TraceState) -> bool {
        self.passes.len() == other.passes.len()
            && self.passes.iter().zip(&other.passes).all(|(a, b)| a.source_layer == b.source_layer)
            && self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| {
                a.source == b.source
                    && a.targets.len() == b.targets.len()
                    && a.targets.iter().zip(&b.targets).all(|(x, y)| {
                        x.layer == y.layer && x.accumulators.len() == y.accumulators.len()
                    })
            })
    }

    /// Folds a worker's partial state into this one, as if its cells had
    /// been processed after this state's cells.
    pub fn merge_from(&mut self, other: &TraceState) -> Result<()> {
        if !self.same_shape(other) {
            return Err(contract_err!("cannot merge trace states of different shape"));
        }
        self.cells_done += other.cells_done;
        for (a, b) in self.passes.iter_mut().zip(&other.passes) {
            a.completed += b.completed;
            a.skipped_cells += b.skipped_cells;
            a.skipped_passes += b.skipped_passes;
            a.elapsed_secs += b.elapsed_secs;
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (ta, tb) in a.targets.iter_mut().zip(&b.targets) {
                for (x, y) in ta.accumulators.iter_mut().zip(&tb.accumulators) {
                    *x = x.merge(y);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceCheckpoint {
    pub config_hash: u64,
    pub state: TraceState,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerReport {
    pub source_layer: usize,
    pub requested_sources: usize,
    pub n_sources: usize,
    pub target_layers: Vec<usize>,
    pub passes_planned: u64,
    pub passes_completed: u64,
    pub skipped_cells: u64,
    pub skipped_passes: u64,
    pub elapsed_secs: f64,
    pub edges: usize,
    pub edges_per_source_mean: f64,
    pub edges_per_source_min: usize,
    pub edges_per_source_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceReport {
    pub config_hash: u64,
    pub n_cells: usize,
    pub cells_done: usize,
    pub layers: Vec<LayerReport>,
    pub total_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutput {
    pub edges: Vec<CausalEdge>,
    pub report: TraceReport,
    pub state: TraceState,
}

pub enum TraceRun {
    Completed(TraceOutput),
    /// A hook asked to stop; the checkpoint resumes the run.
    Interrupted(TraceCheckpoint),
}

/// Callbacks of [`run_trace`].
pub trait TraceHooks {
    /// Monotonic seconds, used for per-layer timings. `None` disables timing.
    fn now(&self) -> Option<f64> {
        None
    }

    /// Called every `checkpoint_every` cells (except after the last cell).
    fn on_checkpoint(&mut self, _checkpoint: &TraceCheckpoint) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl TraceHooks for () {}

/// A validated run: model, dictionaries, cells, config and source plan.
///
/// `process_cell` only touches the state it is given, so workers can each
/// own a state from [`Tracer::empty_state`] and merge afterwards.
pub struct Tracer<'a> {
    model: &'a LayeredModel,
    saes: &'a SaeSet,
    batch: &'a CellBatch,
    config: TraceConfig,
    plan: TracePlan,
    hash: u64,
    code_layers: Vec<usize>,
}

impl<'a> Tracer<'a> {
    pub fn new(
        model: &'a LayeredModel,
        saes: &'a SaeSet,
        catalog: &AnnotationCatalog,
        batch: &'a CellBatch,
        config: TraceConfig,
    ) -> Result<Self> {
        let plan = TracePlan::from_catalog(&config, saes, catalog);
        Self::with_plan(model, saes, batch, config, plan)
    }

    pub fn with_plan(
        model: &'a LayeredModel,
        saes: &'a SaeSet,
        batch: &'a CellBatch,
        config: TraceConfig,
        plan: TracePlan,
    ) -> Result<Self> {
        config.validate()?;
        batch.validate()?;
        if batch.len() < config.n_cells {
            return Err(config_err!("batch has {} cells, run needs {}", batch.len(), config.n_cells));
        }
        for sae in saes.iter() {
            if sae.d_model != model.d_model || sae.layer >= model.n_layers {
                return Err(config_err!("SAE for layer {} does not fit the model", sae.layer));
            }
        }
        plan.validate(model, saes)?;
        let mut code_layers: Vec<usize> =
            plan.layers.iter().flat_map(|l| core::iter::once(l.layer).chain(l.targets.iter().copied())).collect();
        code_layers.sort_unstable();
        code_layers.dedup();

        let mut h = FnvHasher::default();
        h.write_usize(config.n_cells);
        h.write_usize(config.sources_per_layer);
        h.write_u64(config.d_threshold.to_bits());
        h.write_u64(config.consistency_threshold.to_bits());
        for lp in &plan.layers {
            h.write_usize(lp.layer);
            h.write_usize(lp.requested);
            h.write_usize(lp.sources.len());
            lp.sources.iter().for_each(|&s| h.write_usize(s));
            h.write_usize(lp.targets.len());
            lp.targets.iter().for_each(|&t| h.write_usize(t));
        }
        h.write_u64(hash_model(model));
        for &layer in &code_layers {
            h.write_u64(hash_sae(saes.get(layer).expect("validated")));
        }
        h.write_u64(hash_batch(batch, config.n_cells));

        Ok(Self { model, saes, batch, config, plan, hash: h.finish(), code_layers })
    }

    pub fn plan(&self) -> &TracePlan {
        &self.plan
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    pub fn config_hash(&self) -> u64 {
        self.hash
    }

    pub fn n_cells(&self) -> usize {
        self.config.n_cells
    }

    fn sae(&self, layer: usize) -> &SaeDictionary {
        self.saes.get(layer).expect("plan validated")
    }

    pub fn empty_state(&self) -> TraceState {
        let mut blocks = Vec::with_capacity(self.plan.n_sources());
        for lp in &self.plan.layers {
            for &f in &lp.sources {
                blocks.push(SourceBlock {
                    source: FeatureId::new(lp.layer, f),
                    targets: lp
                        .targets
                        .iter()
                        .map(|&t| TargetBlock { layer: t, accumulators: zeroed(self.sae(t).n_features) })
                        .collect(),
                });
            }
        }
        let passes = self
            .plan
            .layers
            .iter()
            .map(|lp| PassCounts { source_layer: lp.layer, ..PassCounts::default() })
            .collect();
        TraceState { cells_done: 0, blocks, passes }
    }

    pub fn checkpoint(&self, state: &TraceState) -> TraceCheckpoint {
        TraceCheckpoint { config_hash: self.hash, state: state.clone() }
    }

    /// Validates a checkpoint against this run and returns its state.
    pub fn resume(&self, checkpoint: TraceCheckpoint) -> Result<TraceState> {
        if checkpoint.config_hash != self.hash {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint hash {:016x} does not match run hash {:016x}",
                checkpoint.config_hash, self.hash
            )));
        }
        if !self.empty_state().same_shape(&checkpoint.state) || checkpoint.state.cells_done > self.n_cells() {
            return Err(Error::CheckpointMismatch("checkpoint layout does not match the run".into()));
        }
        Ok(checkpoint.state)
    }

    /// Traces every planned source over cell `index`, updating `state`.
    pub fn process_cell<C: Fn() -> Option<f64>>(
        &self,
        index: usize,
        state: &mut TraceState,
        now: &C,
    ) -> Result<()> {
        let cell = &self.batch.cells[index];
        let t0 = now();
        let n_real = cell.n_real();
        let clean = match forward_clean(self.model, cell) {
            Ok(states) if n_real > 0 => states,
            Ok(_) | Err(Error::NonFinite { .. }) => {
                state.passes.iter_mut().for_each(|p| p.skipped_cells += 1);
                state.cells_done += 1;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let codes = self.clean_codes(cell, &clean);
        let shared = match (t0, now()) {
            (Some(a), Some(b)) => (b - a) / self.plan.layers.len().max(1) as f64,
            _ => 0.0,
        };

        let mut ws = Workspace::default();
        let mut blocks = state.blocks.iter_mut();
        for (lp, counts) in self.plan.layers.iter().zip(state.passes.iter_mut()) {
            let t_layer = now();
            counts.completed += 1;
            let sae = self.sae(lp.layer);
            let src_codes = codes[lp.layer].as_deref().expect("source layer encoded");
            for &f in &lp.sources {
                let block = blocks.next().expect("state shape validated");
                let Some(ablated) = ablate_cached(sae, &clean[lp.layer], f, src_codes, &cell.padding) else {
                    // Inactive in every position: the replay equals the clean pass.
                    for tb in &mut block.targets {
                        tb.accumulators.iter_mut().for_each(|a| a.update(0.0));
                    }
                    counts.completed += 1;
                    continue;
                };
                let downstream = match forward_from(self.model, &ablated, &cell.padding) {
                    Ok(s) => s,
                    Err(Error::NonFinite { .. }) => {
                        counts.skipped_passes += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                counts.completed += 1;
                for tb in &mut block.targets {
                    let offset = tb.layer - lp.layer - 1;
                    self.measure(
                        &downstream[offset],
                        &clean[tb.layer],
                        codes[tb.layer].as_deref().expect("target layer encoded"),
                        cell,
                        n_real,
                        &mut tb.accumulators,
                        &mut ws,
                    );
                }
            }
            if let (Some(a), Some(b)) = (t_layer, now()) {
                counts.elapsed_secs += b - a + shared;
            }
        }
        state.cells_done += 1;
        Ok(())
    }

    fn clean_codes(&self, cell: &Cell, clean: &[HiddenState]) -> Vec<Option<Vec<SparseCode>>> {
        let mut codes = vec![None; self.model.n_layers];
        for &layer in &self.code_layers {
            let sae = self.sae(layer);
            let mut scratch = vec![0.0; sae.n_features];
            let layer_codes = (0..cell.tokens.len())
                .map(|p| {
                    let mut code = SparseCode { n_features: sae.n_features, ..SparseCode::default() };
                    if !cell.padding[p] {
                        sae.encode_with(clean[layer].position(p), &mut scratch, &mut code);
                    }
                    code
                })
                .collect();
            codes[layer] = Some(layer_codes);
        }
        codes
    }

    /// Adds the per-cell deltas of every target feature at one layer.
    #[allow(clippy::too_many_arguments)]
    fn measure(
        &self,
        ablated: &HiddenState,
        clean: &HiddenState,
        clean_codes: &[SparseCode],
        cell: &Cell,
        n_real: usize,
        accumulators: &mut [EdgeAccumulator],
        ws: &mut Workspace,
    ) {
        let sae = self.sae(clean.layer);
        let f = sae.n_features;
        ws.delta.clear();
        ws.delta.resize(f, 0.0);
        ws.scratch.resize(f, 0.0);
        for p in 0..cell.tokens.len() {
            if cell.padding[p] {
                continue;
            }
            let (a, c) = (ablated.position(p), clean.position(p));
            if a == c {
                continue;
            }
            sae.encode_with(a, &mut ws.scratch[..f], &mut ws.code);
            for (&i, &v) in ws.code.indices.iter().zip(&ws.code.values) {
                ws.delta[i as usize] += v as f64;
            }
            let cc = &clean_codes[p];
            for (&i, &v) in cc.indices.iter().zip(&cc.values) {
                ws.delta[i as usize] -= v as f64;
            }
        }
        let n = n_real as f64;
        for (acc, &s) in accumulators.iter_mut().zip(&ws.delta) {
            acc.update(s / n);
        }
    }

    /// Runs cells `state.cells_done..end` in order.
    pub fn process_until<C: Fn() -> Option<f64>>(
        &self,
        state: &mut TraceState,
        end: usize,
        now: &C,
    ) -> Result<()> {
        while state.cells_done < end.min(self.n_cells()) {
            self.process_cell(state.cells_done, state, now)?;
        }
        Ok(())
    }

    pub fn finish(&self, state: TraceState) -> TraceOutput {
        let edges = finalize_edges(&state.blocks, &self.config);
        let report = self.report(&state, &edges);
        TraceOutput { edges, report, state }
    }

    pub fn report(&self, state: &TraceState, edges: &[CausalEdge]) -> TraceReport {
        let layers = self
            .plan
            .layers
            .iter()
            .zip(&state.passes)
            .map(|(lp, counts)| {
                let per_source: Vec<usize> = lp
                    .sources
                    .iter()
                    .map(|&f| edges.iter().filter(|e| e.source == FeatureId::new(lp.layer, f)).count())
                    .collect();
                let total: usize = per_source.iter().sum();
                LayerReport {
                    source_layer: lp.layer,
                    requested_sources: lp.requested,
                    n_sources: lp.sources.len(),
                    target_layers: lp.targets.clone(),
                    passes_planned: (self.n_cells() * (lp.sources.len() + 1)) as u64,
                    passes_completed: counts.completed,
                    skipped_cells: counts.skipped_cells,
                    skipped_passes: counts.skipped_passes,
                    elapsed_secs: counts.elapsed_secs,
                    edges: total,
                    edges_per_source_mean: if per_source.is_empty() {
                        0.0
                    } else {
                        total as f64 / per_source.len() as f64
                    },
                    edges_per_source_min: per_source.iter().copied().min().unwrap_or(0),
                    edges_per_source_max: per_source.iter().copied().max().unwrap_or(0),
                }
            })
            .collect();
        TraceReport {
            config_hash: self.hash,
            n_cells: self.n_cells(),
            cells_done: state.cells_done,
            layers,
            total_edges: edges.len(),
        }
    }
}

#[derive(Default)]
struct Workspace {
    delta: Vec<f64>,
    scratch: Vec<f32>,
    code: SparseCode,
}

/// Significant edges in block order: source plan order, then target layer,
/// then target feature index. Accumulators with fewer than two cells are
/// skipped.
pub fn finalize_edges(blocks: &[SourceBlock], config: &TraceConfig) -> Vec<CausalEdge> {
    let mut edges = Vec::new();
    for block in blocks {
        for tb in &block.targets {
            for (j, acc) in tb.accumulators.iter().enumerate() {
                let Ok(stats) = acc.finalize() else { continue };
                if let Some(sign) = config.classify(&stats) {
                    edges.push(CausalEdge {
                        source: block.source,
                        target: FeatureId::new(tb.layer, j),
                        d: stats.d,
                        consistency: stats.consistency,
                        n: stats.n,
                        sign,
                    });
                }
            }
        }
    }
    edges
}

/// Full sequential trace with checkpoint hooks.
pub fn run_trace<H: TraceHooks>(
    model: &LayeredModel,
    saes: &SaeSet,
    catalog: &AnnotationCatalog,
    batch: &CellBatch,
    config: &TraceConfig,
    resume: Option<TraceCheckpoint>,
    hooks: &mut H,
) -> Result<TraceRun> {
    let tracer = Tracer::new(model, saes, catalog, batch, config.clone())?;
    let mut state = match resume {
        Some(ckpt) => tracer.resume(ckpt)?,
        None => tracer.empty_state(),
    };
    let n = tracer.n_cells();
    let every = config.checkpoint_every;
    while state.cells_done < n {
        let end = ((state.cells_done / every) + 1) * every;
        {
            let now = || hooks.now();
            tracer.process_until(&mut state, end, &now)?;
        }
        if state.cells_done < n && hooks.on_checkpoint(&tracer.checkpoint(&state)).is_break() {
            return Ok(TraceRun::Interrupted(tracer.checkpoint(&state)));
        }
    }
    Ok(TraceRun::Completed(tracer.finish(state)))
}

/// Accumulators of a single source feature against every downstream layer.
pub fn trace_source_feature(
    model: &LayeredModel,
    saes: &SaeSet,
    source: FeatureId,
    batch: &CellBatch,
    config: &TraceConfig,
) -> Result<Vec<TargetBlock>> {
    let plan = TracePlan::explicit(saes, vec![(source.layer, vec![source.index])]);
    let tracer = Tracer::with_plan(model, saes, batch, config.clone(), plan)?;
    let mut state = tracer.empty_state();
    tracer.process_until(&mut state, tracer.n_cells(), &|| None)?;
    Ok(state.blocks.pop().map(|b| b.targets).unwrap_or_default())
}
