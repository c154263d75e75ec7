// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec;
use alloc::vec::Vec;


use super::{Embedding, EmbeddingMode, LayeredModel, ModelBody};
use crate::error::{config_err, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::{normal_f32, seeded};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

const LN_EPS: f32 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl LayerNorm {
    fn unit(d: usize) -> Self {
        Self { gamma: vec![1.0; d], beta: vec![0.0; d] }
    }

    fn apply(&self, x: &[f32], out: &mut [f32]) {
        let n = x.len() as f32;
        let mean = x.iter().sum::<f32>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for i in 0..x.len() {
            out[i] = (x[i] - mean) * inv * self.gamma[i] + self.beta[i];
        }
    }
}

/// Pre-norm block: `x += Attn(LN1(x))`, then `x += MLP(LN2(x))` with a
/// GELU hidden layer of width `4·d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock {
    pub n_heads: usize,
    pub ln1: LayerNorm,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub ln2: LayerNorm,
    pub w_up: Matrix,
    pub b_up: Vec<f32>,
    pub w_down: Matrix,
    pub b_down: Vec<f32>,
}

#[inline]
fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

impl TransformerBlock {
    fn random(rng: &mut crate::rng::ChaCha8Rng, d: usize, n_heads: usize) -> Self {
        let s_in = 1.0 / (d as f32).sqrt();
        let s_hidden = 1.0 / ((4 * d) as f32).sqrt();
        // Output projections are damped so the residual stream grows slowly with depth.
        Self {
            n_heads,
            ln1: LayerNorm::unit(d),
            w_q: Matrix::random_normal(rng, d, d, s_in),
            w_k: Matrix::random_normal(rng, d, d, s_in),
            w_v: Matrix::random_normal(rng, d, d, s_in),
            w_o: Matrix::random_normal(rng, d, d, 0.5 * s_in),
            ln2: LayerNorm::unit(d),
            w_up: Matrix::random_normal(rng, 4 * d, d, s_in),
            b_up: (0..4 * d).map(|_| 0.02 * normal_f32(rng)).collect(),
            w_down: Matrix::random_normal(rng, d, 4 * d, 0.5 * s_hidden),
            b_down: vec![0.0; d],
        }
    }

    /// In-place forward over `[positions × d]`. Padded positions are masked
    /// out as attention keys but still updated as queries.
    pub(crate) fn forward(&self, x: &mut [f32], padding: &[bool], d: usize) {
        let positions = padding.len();
        let head_dim = d / self.n_heads;
        let scale = 1.0 / (head_dim as f32).sqrt();

        let mut normed = vec![0.0f32; positions * d];
        for p in 0..positions {
            self.ln1.apply(&x[p * d..(p + 1) * d], &mut normed[p * d..(p + 1) * d]);
        }
        let project = |w: &Matrix| {
            let mut out = vec![0.0f32; positions * d];
            for p in 0..positions {
                w.matvec_into(&normed[p * d..(p + 1) * d], &mut out[p * d..(p + 1) * d]);
            }
            out
        };
        let (q, k, v) = (project(&self.w_q), project(&self.w_k), project(&self.w_v));

        let keys: Vec<usize> = (0..positions).filter(|&p| !padding[p]).collect();
        let mut attn = vec![0.0f32; positions * d];
        let mut scores = vec![0.0f32; keys.len()];
        for h in 0..self.n_heads {
            let span = h * head_dim..(h + 1) * head_dim;
            for p in 0..positions {
                let qp = &q[p * d..(p + 1) * d][span.clone()];
                let mut max = f32::NEG_INFINITY;
                for (s, &kp) in scores.iter_mut().zip(&keys) {
                    *s = dot(qp, &k[kp * d..(kp + 1) * d][span.clone()]) * scale;
                    max = max.max(*s);
                }
                let mut total = 0.0f32;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    total += *s;
                }
                let out = &mut attn[p * d..(p + 1) * d][span.clone()];
                for (s, &kp) in scores.iter().zip(&keys) {
                    let w = s / total;
                    for (o, vv) in out.iter_mut().zip(&v[kp * d..(kp + 1) * d][span.clone()]) {
                        *o += w * vv;
                    }
                }
            }
        }

        let mut tmp = vec![0.0f32; d];
        for p in 0..positions {
            self.w_o.matvec_into(&attn[p * d..(p + 1) * d], &mut tmp);
            for (xi, t) in x[p * d..(p + 1) * d].iter_mut().zip(&tmp) {
                *xi += t;
            }
        }

        let mut hidden = vec![0.0f32; 4 * d];
        let mut n2 = vec![0.0f32; d];
        for p in 0..positions {
            let row = &mut x[p * d..(p + 1) * d];
            self.ln2.apply(row, &mut n2);
            self.w_up.matvec_into(&n2, &mut hidden);
            for (hv, b) in hidden.iter_mut().zip(&self.b_up) {
                *hv = gelu(*hv + b);
            }
            self.w_down.matvec_into(&hidden, &mut tmp);
            for ((xi, t), b) in row.iter_mut().zip(&tmp).zip(&self.b_down) {
                *xi += t + b;
            }
        }
    }
}

/// Deterministic toy transformer with `n_layers` pre-norm blocks.
///
/// Token, value and positional embeddings are additive; `max_positions`
/// bounds the sequence length the model accepts.
pub fn build_toy_transformer(
    seed: u64,
    n_layers: usize,
    d_model: usize,
    n_heads: usize,
    vocab: usize,
    max_positions: usize,
) -> Result<LayeredModel> {
    if n_layers < 2 {
        return Err(config_err!("toy transformer needs at least 2 layers, got {n_layers}"));
    }
    if n_heads == 0 || d_model == 0 || d_model % n_heads != 0 {
        return Err(config_err!("d_model {d_model} must be a positive multiple of n_heads {n_heads}"));
    }
    if vocab == 0 || max_positions == 0 {
        return Err(config_err!("vocab and max_positions must be positive"));
    }
    let mut rng = seeded(seed, 0x7f0);
    let embedding = Embedding {
        mode: EmbeddingMode::Additive,
        token: Matrix::random_normal(&mut rng, vocab, d_model, 1.0),
        value: (0..d_model).map(|_| normal_f32(&mut rng)).collect(),
        position: Matrix::random_normal(&mut rng, max_positions, d_model, 0.1),
    };
    let blocks = (0..n_layers)
        .map(|_| TransformerBlock::random(&mut rng, d_model, n_heads))
        .collect();
    Ok(LayeredModel {
        n_layers,
        d_model,
        seed,
        embedding,
        body: ModelBody::Transformer(blocks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_parameters() {
        let a = build_toy_transformer(7, 6, 32, 4, 50, 16).unwrap();
        let b = build_toy_transformer(7, 6, 32, 4, 50, 16).unwrap();
        assert_eq!(a, b);
        let c = build_toy_transformer(8, 6, 32, 4, 50, 16).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_toy_transformer(1, 1, 32, 4, 10, 8).is_err());
        assert!(build_toy_transformer(1, 4, 30, 4, 10, 8).is_err());
        assert!(build_toy_transformer(1, 4, 32, 0, 10, 8).is_err());
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_192).abs() < 1e-5);
        assert!(gelu(-10.0).abs() < 1e-6);
    }
}
