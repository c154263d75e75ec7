// SPDX-License-Identifier: MIT OR Apache-2.0

//! Content hashes that tie a checkpoint to the exact run it came from.

use core::hash::Hasher;

use fnv::FnvHasher;

use crate::linalg::Matrix;
use crate::model::{CellBatch, EmbeddingMode, LayeredModel, ModelBody};
use crate::sae::SaeDictionary;

fn floats(h: &mut FnvHasher, xs: &[f32]) {
    h.write_usize(xs.len());
    for x in xs {
        h.write_u32(x.to_bits());
    }
}

fn matrix(h: &mut FnvHasher, m: &Matrix) {
    h.write_usize(m.rows);
    h.write_usize(m.cols);
    floats(h, &m.data);
}

pub fn hash_model(model: &LayeredModel) -> u64 {
    let mut h = FnvHasher::default();
    h.write_usize(model.n_layers);
    h.write_usize(model.d_model);
    h.write_u64(model.seed);
    h.write_u8(match model.embedding.mode {
        EmbeddingMode::Additive => 0,
        EmbeddingMode::ValueScaled => 1,
    });
    matrix(&mut h, &model.embedding.token);
    floats(&mut h, &model.embedding.value);
    matrix(&mut h, &model.embedding.position);
    match &model.body {
        ModelBody::Transformer(blocks) => {
            h.write_u8(0);
            for b in blocks {
                h.write_usize(b.n_heads);
                for m in [&b.w_q, &b.w_k, &b.w_v, &b.w_o, &b.w_up, &b.w_down] {
                    matrix(&mut h, m);
                }
                for v in [&b.ln1.gamma, &b.ln1.beta, &b.ln2.gamma, &b.ln2.beta, &b.b_up, &b.b_down] {
                    floats(&mut h, v);
                }
            }
        }
        ModelBody::Planted(p) => {
            h.write_u8(1);
            for layer in &p.transfers {
                h.write_usize(layer.len());
                for t in layer {
                    floats(&mut h, &t.read);
                    floats(&mut h, &t.write);
                    h.write_u32(t.weight.to_bits());
                }
            }
        }
    }
    h.finish()
}

pub fn hash_sae(sae: &SaeDictionary) -> u64 {
    let mut h = FnvHasher::default();
    h.write_usize(sae.layer);
    h.write_usize(sae.k);
    matrix(&mut h, &sae.w_enc);
    floats(&mut h, &sae.b_enc);
    matrix(&mut h, &sae.decoder);
    floats(&mut h, &sae.b_dec);
    h.finish()
}

/// Hash of the first `n_cells` cells of `batch`.
pub fn hash_batch(batch: &CellBatch, n_cells: usize) -> u64 {
    let mut h = FnvHasher::default();
    h.write_usize(batch.seq_len);
    for cell in batch.cells.iter().take(n_cells) {
        for &t in &cell.tokens {
            h.write_u32(t);
        }
        floats(&mut h, &cell.values);
        for &p in &cell.padding {
            h.write_u8(p as u8);
        }
    }
    h.finish()
}
