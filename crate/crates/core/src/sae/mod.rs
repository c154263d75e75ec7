// SPDX-License-Identifier: MIT OR Apache-2.0

//! TopK sparse autoencoders.
//!
//! Encoding rectifies the pre-activations `W_enc·h + b_enc` and keeps the
//! `k` largest positive values; equal values resolve toward the lower
//! feature index so codes are identical on every platform.

mod train;

use alloc::vec;
use alloc::vec::Vec;

pub use train::{train_sae, TrainConfig, TrainedSae};

use crate::error::{config_err, contract_err, Result};
use crate::linalg::{axpy, dot, random_orthonormal, random_unit, Matrix};
use crate::rng::seeded;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Sparse code: strictly increasing feature indices with positive values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode {
    pub indices: Vec<u32>,
    pub values: Vec<f32>,
    pub n_features: usize,
}

impl SparseCode {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, feature: usize) -> f32 {
        match self.indices.binary_search(&(feature as u32)) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.n_features];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    /// Builds a code from a dense vector, keeping strictly positive entries.
    pub fn from_dense(dense: &[f32]) -> Self {
        let mut code = Self { n_features: dense.len(), ..Self::default() };
        for (i, &v) in dense.iter().enumerate() {
            if v > 0.0 {
                code.indices.push(i as u32);
                code.values.push(v);
            }
        }
        code
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SynthMode {
    /// `min(d, F)` orthonormal decoder columns followed by random unit
    /// columns; encoder is the decoder transpose and biases are zero.
    Orthonormal,
    /// Random unit decoder columns, tied encoder, zero biases.
    Random,
}

/// TopK SAE parameters for one layer.
///
/// The decoder is stored column-major as `decoder[i] = W_dec[:, i]`;
/// [`SaeDictionary::w_dec`] returns the conventional `[d × F]` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeDictionary {
    pub layer: usize,
    pub d_model: usize,
    pub n_features: usize,
    pub k: usize,
    /// `[F × d]`.
    pub w_enc: Matrix,
    pub b_enc: Vec<f32>,
    /// `[F × d]`, row `i` is decoder column `i`.
    pub decoder: Matrix,
    pub b_dec: Vec<f32>,
}

impl SaeDictionary {
    /// Assembles a dictionary from raw parameters, checking shapes and
    /// finiteness and normalizing decoder columns.
    pub fn from_parts(
        layer: usize,
        k: usize,
        w_enc: Matrix,
        b_enc: Vec<f32>,
        w_dec: &Matrix,
        b_dec: Vec<f32>,
    ) -> Result<Self> {
        let (f, d) = (w_enc.rows, w_enc.cols);
        if w_dec.rows != d || w_dec.cols != f || b_enc.len() != f || b_dec.len() != d {
            return Err(config_err!("SAE parameter shapes disagree (F = {f}, d = {d})"));
        }
        if k == 0 || k > f {
            return Err(config_err!("k = {k} must lie in 1..={f}"));
        }
        let mut sae = Self {
            layer,
            d_model: d,
            n_features: f,
            k,
            w_enc,
            b_enc,
            decoder: w_dec.transpose(),
            b_dec,
        };
        if !sae.is_finite() {
            return Err(config_err!("SAE parameters must be finite"));
        }
        sae.decoder.normalize_columns_as_rows();
        Ok(sae)
    }

    pub fn w_dec(&self) -> Matrix {
        self.decoder.transpose()
    }

    #[inline]
    pub fn decoder_column(&self, feature: usize) -> &[f32] {
        self.decoder.row(feature)
    }

    pub fn is_finite(&self) -> bool {
        self.w_enc.is_finite()
            && self.decoder.is_finite()
            && self.b_enc.iter().chain(&self.b_dec).all(|v| v.is_finite())
    }

    /// Largest deviation of a decoder column norm from 1.
    pub fn decoder_norm_error(&self) -> f64 {
        self.decoder.transpose().max_column_norm_error()
    }

    /// Rectified pre-activations `max(0, W_enc·h + b_enc)`.
    pub fn pre_activations(&self, h: &[f32], out: &mut [f32]) {
        self.w_enc.matvec_into(h, out);
        for (o, b) in out.iter_mut().zip(&self.b_enc) {
            *o += b;
        }
    }

    pub fn encode(&self, h: &[f32]) -> SparseCode {
        let mut pre = vec![0.0; self.n_features];
        let mut code = SparseCode::default();
        self.encode_with(h, &mut pre, &mut code);
        code
    }

    /// Allocation-free encode; `scratch` must hold `F` floats.
    pub fn encode_with(&self, h: &[f32], scratch: &mut [f32], code: &mut SparseCode) {
        debug_assert_eq!(h.len(), self.d_model);
        self.pre_activations(h, scratch);
        top_k_positive(scratch, self.k, code);
    }

    pub fn decode(&self, code: &SparseCode) -> Vec<f32> {
        let mut out = self.b_dec.clone();
        for (&i, &v) in code.indices.iter().zip(&code.values) {
            axpy(v, self.decoder_column(i as usize), &mut out);
        }
        out
    }

    /// Reconstruction `decode(encode(h))`.
    pub fn reconstruct(&self, h: &[f32]) -> Vec<f32> {
        self.decode(&self.encode(h))
    }

    pub fn check_code(&self, code: &SparseCode) -> Result<()> {
        if code.n_features != self.n_features || code.indices.len() != code.values.len() {
            return Err(contract_err!("code does not match a {}-feature dictionary", self.n_features));
        }
        if code.indices.iter().any(|&i| i as usize >= self.n_features)
            || code.indices.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(contract_err!("code indices must be increasing and < {}", self.n_features));
        }
        Ok(())
    }
}

/// Keeps the `k` largest strictly positive entries of `pre`, ties toward the
/// lower index, and writes them to `code` in index order.
pub(crate) fn top_k_positive(pre: &[f32], k: usize, code: &mut SparseCode) {
    code.indices.clear();
    code.values.clear();
    code.n_features = pre.len();
    // `best` stays sorted by (value desc, index asc); k is small.
    let mut best: Vec<(f32, u32)> = Vec::with_capacity(k + 1);
    for (i, &v) in pre.iter().enumerate() {
        if !(v > 0.0) {
            continue;
        }
        if best.len() == k && v <= best[k - 1].0 {
            // Equal values lose to the earlier (lower) index already held.
            continue;
        }
        let pos = best.iter().position(|&(bv, _)| v > bv).unwrap_or(best.len());
        best.insert(pos, (v, i as u32));
        best.truncate(k);
    }
    best.sort_unstable_by_key(|&(_, i)| i);
    for (v, i) in best {
        code.indices.push(i);
        code.values.push(v);
    }
}

impl Matrix {
    /// Normalizes each row to unit L2 norm (rows are decoder columns here).
    pub(crate) fn normalize_columns_as_rows(&mut self) {
        for r in 0..self.rows {
            let row = self.row_mut(r);
            let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
            let norm = norm.sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
            }
        }
    }
}

/// Synthetic dictionary with tied encoder and zero biases.
pub fn synthesize_sae(
    seed: u64,
    layer: usize,
    d_model: usize,
    n_features: usize,
    k: usize,
    mode: SynthMode,
) -> Result<SaeDictionary> {
    if d_model == 0 || n_features == 0 {
        return Err(config_err!("SAE dimensions must be positive"));
    }
    if k == 0 || k > n_features {
        return Err(config_err!("k = {k} must lie in 1..={n_features}"));
    }
    let mut rng = seeded(seed, 0x5ae0 + layer as u64);
    let ortho = match mode {
        SynthMode::Orthonormal => random_orthonormal(&mut rng, d_model, d_model.min(n_features)),
        SynthMode::Random => Vec::new(),
    };
    let mut basis = Matrix::zeros(d_model, ortho.len());
    for (c, dir) in ortho.iter().enumerate() {
        for (r, v) in dir.iter().enumerate() {
            basis.set(r, c, *v);
        }
    }
    synthesize_sae_with_basis(seed, layer, &basis, n_features, k)
}

/// Tied dictionary whose first columns are exactly `basis` (`[d × m]`,
/// columns assumed unit-norm), padded with seeded random unit columns up to
/// `n_features`.
pub fn synthesize_sae_with_basis(
    seed: u64,
    layer: usize,
    basis: &Matrix,
    n_features: usize,
    k: usize,
) -> Result<SaeDictionary> {
    let d = basis.rows;
    if basis.cols > n_features {
        return Err(config_err!("basis has {} columns but F = {n_features}", basis.cols));
    }
    if k == 0 || k > n_features {
        return Err(config_err!("k = {k} must lie in 1..={n_features}"));
    }
    let mut rng = seeded(seed, 0x5ae1_0000 + layer as u64);
    let mut decoder = Matrix::zeros(n_features, d);
    for c in 0..basis.cols {
        for r in 0..d {
            decoder.set(c, r, basis.get(r, c));
        }
    }
    for c in basis.cols..n_features {
        decoder.row_mut(c).copy_from_slice(&random_unit(&mut rng, d));
    }
    decoder.normalize_columns_as_rows();
    Ok(SaeDictionary {
        layer,
        d_model: d,
        n_features,
        k,
        w_enc: decoder.clone(),
        b_enc: vec![0.0; n_features],
        decoder,
        b_dec: vec![0.0; d],
    })
}

/// `⟨h, decoder column f⟩`, handy when checking ablations.
pub fn project(sae: &SaeDictionary, h: &[f32], feature: usize) -> f32 {
    dot(h, sae.decoder_column(feature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_sae(n: usize, k: usize) -> SaeDictionary {
        SaeDictionary::from_parts(0, k, Matrix::identity(n), vec![0.0; n], &Matrix::identity(n), vec![0.0; n])
            .unwrap()
    }

    #[test]
    fn encode_keeps_top_k() {
        let sae = identity_sae(4, 2);
        let code = sae.encode(&[3.0, -1.0, 2.0, 0.5]);
        assert_eq!(code.indices, [0, 2]);
        assert_eq!(code.values, [3.0, 2.0]);
    }

    #[test]
    fn encode_rectifies() {
        let sae = identity_sae(4, 2);
        assert_eq!(sae.encode(&[-3.0, -1.0, 0.0, -0.5]).nnz(), 0);
    }

    #[test]
    fn full_k_is_relu() {
        let sae = identity_sae(4, 4);
        let code = sae.encode(&[3.0, -1.0, 2.0, 0.5]);
        assert_eq!(code.to_dense(), [3.0, 0.0, 2.0, 0.5]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let sae = identity_sae(5, 2);
        let code = sae.encode(&[1.0, 2.0, 1.0, 2.0, 2.0]);
        assert_eq!(code.indices, [1, 3]);
        let code = sae.encode(&[1.0, 0.5, 1.0, 1.0, 0.0]);
        assert_eq!(code.indices, [0, 2]);
    }

    #[test]
    fn decode_identity_and_empty() {
        let mut sae = identity_sae(4, 2);
        let code = SparseCode { indices: vec![0, 2], values: vec![3.0, 2.0], n_features: 4 };
        assert_eq!(sae.decode(&code), [3.0, 0.0, 2.0, 0.0]);
        sae.b_dec = vec![0.5, 0.0, -1.0, 2.0];
        assert_eq!(sae.decode(&SparseCode { n_features: 4, ..Default::default() }), sae.b_dec);
    }

    #[test]
    fn synthesized_columns_are_unit() {
        for mode in [SynthMode::Orthonormal, SynthMode::Random] {
            let sae = synthesize_sae(3, 1, 16, 64, 4, mode).unwrap();
            assert!(sae.decoder_norm_error() <= 1e-6, "{mode:?}");
            assert_eq!(sae, synthesize_sae(3, 1, 16, 64, 4, mode).unwrap());
        }
    }

    #[test]
    fn synth_rejects_bad_k() {
        assert!(synthesize_sae(1, 0, 8, 16, 0, SynthMode::Random).is_err());
        assert!(synthesize_sae(1, 0, 8, 16, 17, SynthMode::Random).is_err());
    }

    #[test]
    fn code_validation() {
        let sae = identity_sae(4, 2);
        let bad = SparseCode { indices: vec![2, 1], values: vec![1.0, 1.0], n_features: 4 };
        assert!(sae.check_code(&bad).is_err());
        assert!(sae.check_code(&sae.encode(&[1.0, 2.0, 0.0, 0.0])).is_ok());
    }

    proptest! {
        #[test]
        fn codes_are_sparse_and_positive(h in prop::collection::vec(-3.0f32..3.0, 16), k in 1usize..8) {
            let sae = synthesize_sae(9, 0, 16, 48, k, SynthMode::Random).unwrap();
            let code = sae.encode(&h);
            prop_assert!(code.nnz() <= k);
            prop_assert!(code.values.iter().all(|v| *v > 0.0));
            prop_assert!(sae.check_code(&code).is_ok());
        }

        #[test]
        fn orthonormal_round_trip(vals in prop::collection::vec(0.0f32..5.0, 12), k in 1usize..=12) {
            let sae = synthesize_sae(4, 0, 12, 12, k, SynthMode::Orthonormal).unwrap();
            // Keep the k largest so the code is k-sparse, with distinct values.
            let mut dense: Vec<f32> = vals.iter().enumerate().map(|(i, v)| v + i as f32 * 1e-3).collect();
            let mut sorted = dense.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let cut = sorted[k - 1];
            dense.iter_mut().for_each(|v| if *v < cut { *v = 0.0 });
            let code = SparseCode::from_dense(&dense);
            let back = sae.encode(&sae.decode(&code));
            prop_assert_eq!(&back.indices, &code.indices);
            for (a, b) in back.values.iter().zip(&code.values) {
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
    }
}
