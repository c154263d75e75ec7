// SPDX-License-Identifier: MIT OR Apache-2.0

//! Layered models with replayable forward passes.
//!
//! A [`LayeredModel`] maps a cell to one hidden state per layer. The clean
//! pass ([`forward_clean`]) and the partial replay from a given layer
//! ([`forward_from`]) share the same per-layer kernels, so replaying from a
//! clean state reproduces the clean downstream states bit for bit.

mod cells;
mod planted;
mod transformer;

use alloc::vec::Vec;

pub use cells::{cluster_sizes, generate_cells, Cell, CellBatch, CellKind, PAD_TOKEN, TISSUE_CLUSTERS};
pub use planted::{build_planted_model, chained_map, PlantedEdge, PlantedLayers, PlantedSpec, Transfer};
pub use transformer::{build_toy_transformer, LayerNorm, TransformerBlock};

use crate::error::{contract_err, Error, Result};
use crate::linalg::{axpy, Matrix};

/// Hidden state at the output of one layer, `[positions × d_model]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub layer: usize,
    pub positions: usize,
    pub d_model: usize,
    pub data: Vec<f32>,
}

impl HiddenState {
    pub fn new(layer: usize, positions: usize, d_model: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), positions * d_model);
        Self { layer, positions, d_model, data }
    }

    #[inline]
    pub fn position(&self, p: usize) -> &[f32] {
        &self.data[p * self.d_model..(p + 1) * self.d_model]
    }

    #[inline]
    pub fn position_mut(&mut self, p: usize) -> &mut [f32] {
        &mut self.data[p * self.d_model..(p + 1) * self.d_model]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelKind {
    ToyTransformer,
    PlantedLinear,
}

/// How token ids and expression values become the layer-input state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// `token[t] + value · value_dir + position[p]`.
    Additive,
    /// `value · token[t]`.
    ValueScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub mode: EmbeddingMode,
    /// `[vocab × d]`.
    pub token: Matrix,
    /// `[d]`; unused in value-scaled mode.
    pub value: Vec<f32>,
    /// `[max_positions × d]`; may have zero rows in value-scaled mode.
    pub position: Matrix,
}

impl Embedding {
    pub fn vocab(&self) -> usize {
        self.token.rows
    }

    fn embed(&self, cell: &Cell, d: usize) -> Result<Vec<f32>> {
        let seq = cell.tokens.len();
        if self.mode == EmbeddingMode::Additive && seq > self.position.rows {
            return Err(contract_err!(
                "sequence length {seq} exceeds the model's {} positions",
                self.position.rows
            ));
        }
        let mut out = alloc::vec![0.0f32; seq * d];
        for (p, (&tok, &val)) in cell.tokens.iter().zip(&cell.values).enumerate() {
            let tok = tok as usize;
            if tok >= self.token.rows {
                return Err(contract_err!("token {tok} outside vocabulary {}", self.token.rows));
            }
            let row = &mut out[p * d..(p + 1) * d];
            match self.mode {
                EmbeddingMode::Additive => {
                    row.copy_from_slice(self.token.row(tok));
                    axpy(val, &self.value, row);
                    axpy(1.0, self.position.row(p), row);
                }
                EmbeddingMode::ValueScaled => axpy(val, self.token.row(tok), row),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Transformer(Vec<TransformerBlock>),
    Planted(PlantedLayers),
}

/// A deterministic stack of `n_layers` state transitions.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    pub n_layers: usize,
    pub d_model: usize,
    pub seed: u64,
    pub embedding: Embedding,
    pub body: ModelBody,
}

impl LayeredModel {
    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::Transformer(_) => ModelKind::ToyTransformer,
            ModelBody::Planted(_) => ModelKind::PlantedLinear,
        }
    }

    /// Applies layer `layer` to `x` in place.
    fn apply_layer(&self, layer: usize, x: &mut [f32], padding: &[bool]) {
        match &self.body {
            ModelBody::Transformer(blocks) => blocks[layer].forward(x, padding, self.d_model),
            ModelBody::Planted(p) => p.apply(layer, x, self.d_model),
        }
    }
}

/// Hidden states at the output of every layer `0..n_layers`.
///
/// Padded positions are propagated like any other position; consumers
/// exclude them using the cell's padding mask.
pub fn forward_clean(model: &LayeredModel, cell: &Cell) -> Result<Vec<HiddenState>> {
    let d = model.d_model;
    let positions = cell.tokens.len();
    let mut x = model.embedding.embed(cell, d)?;
    let mut states = Vec::with_capacity(model.n_layers);
    for layer in 0..model.n_layers {
        model.apply_layer(layer, &mut x, &cell.padding);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer });
        }
        states.push(HiddenState::new(layer, positions, d, x.clone()));
    }
    Ok(states)
}

/// Replays layers `start.layer + 1 .. n_layers` from `start`.
///
/// Returns an empty list when `start` is the last layer.
pub fn forward_from(
    model: &LayeredModel,
    start: &HiddenState,
    padding: &[bool],
) -> Result<Vec<HiddenState>> {
    if start.layer >= model.n_layers {
        return Err(contract_err!(
            "start layer {} outside a {}-layer model",
            start.layer,
            model.n_layers
        ));
    }
    if start.d_model != model.d_model || padding.len() != start.positions {
        return Err(contract_err!("hidden state shape does not match model and mask"));
    }
    let mut x = start.data.clone();
    let mut states = Vec::with_capacity(model.n_layers - start.layer - 1);
    for layer in start.layer + 1..model.n_layers {
        model.apply_layer(layer, &mut x, padding);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer });
        }
        states.push(HiddenState::new(layer, start.positions, start.d_model, x.clone()));
    }
    Ok(states)
}

/// Runs `forward_clean` over a whole batch.
pub fn forward_batch(model: &LayeredModel, batch: &CellBatch) -> Result<Vec<Vec<HiddenState>>> {
    if batch.is_empty() {
        return Err(contract_err!("empty batch"));
    }
    batch.cells.iter().map(|c| forward_clean(model, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LayeredModel {
        build_toy_transformer(7, 6, 32, 4, 64, 32).unwrap()
    }

    #[test]
    fn replay_matches_clean() {
        let model = toy();
        let batch = generate_cells(3, 5, 16, 64, CellKind::K562Like).unwrap();
        for cell in &batch.cells {
            let clean = forward_clean(&model, cell).unwrap();
            assert_eq!(clean.len(), 6);
            for l in 0..6 {
                let replay = forward_from(&model, &clean[l], &cell.padding).unwrap();
                assert_eq!(replay.as_slice(), &clean[l + 1..]);
            }
        }
    }

    #[test]
    fn last_layer_replay_is_empty() {
        let model = toy();
        let batch = generate_cells(3, 1, 8, 64, CellKind::K562Like).unwrap();
        let clean = forward_clean(&model, &batch.cells[0]).unwrap();
        assert!(forward_from(&model, &clean[5], &batch.cells[0].padding).unwrap().is_empty());
    }

    #[test]
    fn replay_rejects_bad_layer() {
        let model = toy();
        let st = HiddenState::new(9, 2, 32, alloc::vec![0.0; 64]);
        assert!(matches!(forward_from(&model, &st, &[false, false]), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_token_batch_is_finite() {
        let model = toy();
        let cell = Cell {
            tokens: alloc::vec![0; 8],
            values: alloc::vec![0.0; 8],
            padding: alloc::vec![false; 8],
            cluster: 0,
        };
        let states = forward_clean(&model, &cell).unwrap();
        assert!(states.iter().all(HiddenState::is_finite));
    }
}
