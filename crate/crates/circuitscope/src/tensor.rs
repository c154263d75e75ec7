// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model and SAE files: a JSON manifest naming each parameter array, plus a
//! sidecar blob of row-major little-endian `f32`s at the listed offsets.

use std::fs;
use std::path::{Path, PathBuf};

use circuitscope_core::linalg::Matrix;
use circuitscope_core::model::{
    Embedding, EmbeddingMode, LayerNorm, LayeredModel, ModelBody, ModelKind, PlantedEdge, PlantedLayers,
    TransformerBlock, Transfer,
};
use circuitscope_core::sae::SaeDictionary;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const MODEL_FORMAT: &str = "circuitscope-model/1";
pub const SAE_FORMAT: &str = "circuitscope-sae/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Default)]
struct BlobWriter {
    bytes: Vec<u8>,
    entries: Vec<TensorEntry>,
}

impl BlobWriter {
    fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: &[f32]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push(TensorEntry { name: name.into(), shape, offset: self.bytes.len() as u64 });
        for v in data {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn matrix(&mut self, name: impl Into<String>, m: &Matrix) {
        self.push(name, vec![m.rows, m.cols], &m.data);
    }

    fn vector(&mut self, name: impl Into<String>, v: &[f32]) {
        self.push(name, vec![v.len()], v);
    }
}

struct BlobReader<'a> {
    path: &'a Path,
    bytes: Vec<u8>,
    entries: &'a [TensorEntry],
}

impl BlobReader<'_> {
    fn raw(&self, name: &str) -> Result<(&TensorEntry, Vec<f32>)> {
        let e = self
            .entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::format(self.path, format!("missing tensor {name}")))?;
        let len: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start
            .checked_add(len * 4)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::format(self.path, format!("tensor {name} runs past the end of the blob")))?;
        let data = self.bytes[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Ok((e, data))
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let (e, data) = self.raw(name)?;
        if e.shape != [rows, cols] {
            return Err(Error::format(self.path, format!("tensor {name} has shape {:?}, expected [{rows}, {cols}]", e.shape)));
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    /// A matrix whose row count is read from the manifest.
    fn matrix_any_rows(&self, name: &str, cols: usize) -> Result<Matrix> {
        let (e, data) = self.raw(name)?;
        match e.shape.as_slice() {
            [rows, c] if *c == cols => Ok(Matrix::from_vec(*rows, cols, data)),
            s => Err(Error::format(self.path, format!("tensor {name} has shape {s:?}, expected [_, {cols}]"))),
        }
    }

    fn vector(&self, name: &str, len: usize) -> Result<Vec<f32>> {
        let (e, data) = self.raw(name)?;
        if e.shape != [len] {
            return Err(Error::format(self.path, format!("tensor {name} has shape {:?}, expected [{len}]", e.shape)));
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub kind: ModelKind,
    pub n_layers: usize,
    pub d_model: usize,
    pub seed: u64,
    pub value_scaled_embedding: bool,
    /// Transformer only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_heads: Option<usize>,
    /// Planted only: transfers per layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfers_per_layer: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_directions: Option<Vec<Option<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_edges: Option<Vec<PlantedEdge>>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeManifest {
    pub format: String,
    pub layer: usize,
    pub d_model: usize,
    pub n_features: usize,
    pub k: usize,
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn write_pair<M: Serialize>(path: &Path, manifest: &M, blob: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let bp = blob_path(path);
    fs::write(&bp, blob).at(&bp)?;
    let json = serde_json::to_string_pretty(manifest).at(path)?;
    fs::write(path, json + "\n").at(path)
}

fn read_blob(path: &Path, blob: &str) -> Result<Vec<u8>> {
    let bp = path.parent().unwrap_or(Path::new(".")).join(blob);
    fs::read(&bp).at(&bp)
}

fn blob_name(path: &Path) -> String {
    blob_path(path).file_name().expect("manifest path has a file name").to_string_lossy().into_owned()
}

pub fn write_model(path: &Path, model: &LayeredModel) -> Result<()> {
    let mut w = BlobWriter::default();
    w.matrix("embedding.token", &model.embedding.token);
    w.vector("embedding.value", &model.embedding.value);
    w.matrix("embedding.position", &model.embedding.position);
    let mut manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        kind: model.kind(),
        n_layers: model.n_layers,
        d_model: model.d_model,
        seed: model.seed,
        value_scaled_embedding: model.embedding.mode == EmbeddingMode::ValueScaled,
        n_heads: None,
        transfers_per_layer: None,
        token_directions: None,
        planted_edges: None,
        blob: blob_name(path),
        tensors: Vec::new(),
    };
    match &model.body {
        ModelBody::Transformer(blocks) => {
            manifest.n_heads = blocks.first().map(|b| b.n_heads);
            for (l, b) in blocks.iter().enumerate() {
                w.vector(format!("blocks.{l}.ln1.gamma"), &b.ln1.gamma);
                w.vector(format!("blocks.{l}.ln1.beta"), &b.ln1.beta);
                w.matrix(format!("blocks.{l}.w_q"), &b.w_q);
                w.matrix(format!("blocks.{l}.w_k"), &b.w_k);
                w.matrix(format!("blocks.{l}.w_v"), &b.w_v);
                w.matrix(format!("blocks.{l}.w_o"), &b.w_o);
                w.vector(format!("blocks.{l}.ln2.gamma"), &b.ln2.gamma);
                w.vector(format!("blocks.{l}.ln2.beta"), &b.ln2.beta);
                w.matrix(format!("blocks.{l}.w_up"), &b.w_up);
                w.vector(format!("blocks.{l}.b_up"), &b.b_up);
                w.matrix(format!("blocks.{l}.w_down"), &b.w_down);
                w.vector(format!("blocks.{l}.b_down"), &b.b_down);
            }
        }
        ModelBody::Planted(p) => {
            manifest.transfers_per_layer = Some(p.transfers.iter().map(Vec::len).collect());
            manifest.token_directions = Some(p.token_directions.clone());
            manifest.planted_edges = Some(p.spec_edges.clone());
            for (l, ts) in p.transfers.iter().enumerate() {
                let weights: Vec<f32> = ts.iter().map(|t| t.weight).collect();
                w.vector(format!("transfers.{l}.weight"), &weights);
                for (i, t) in ts.iter().enumerate() {
                    w.vector(format!("transfers.{l}.{i}.read"), &t.read);
                    w.vector(format!("transfers.{l}.{i}.write"), &t.write);
                }
            }
        }
    }
    manifest.tensors = w.entries;
    write_pair(path, &manifest, &w.bytes)
}

pub fn read_model(path: &Path) -> Result<LayeredModel> {
    let text = fs::read_to_string(path).at(path)?;
    let m: ModelManifest = serde_json::from_str(&text).at(path)?;
    if m.format != MODEL_FORMAT {
        return Err(Error::format(path, format!("unsupported model format {:?}", m.format)));
    }
    let d = m.d_model;
    if d == 0 || m.n_layers < 2 {
        return Err(Error::format(path, "model needs d_model > 0 and at least 2 layers"));
    }
    let r = BlobReader { path, bytes: read_blob(path, &m.blob)?, entries: &m.tensors };
    let mode = if m.value_scaled_embedding { EmbeddingMode::ValueScaled } else { EmbeddingMode::Additive };
    let value_len = if mode == EmbeddingMode::Additive { d } else { r.raw("embedding.value")?.1.len() };
    let embedding = Embedding {
        mode,
        token: r.matrix_any_rows("embedding.token", d)?,
        value: r.vector("embedding.value", value_len)?,
        position: r.matrix_any_rows("embedding.position", d)?,
    };
    let body = match m.kind {
        ModelKind::ToyTransformer => {
            let n_heads = m.n_heads.filter(|&h| h > 0 && d % h == 0).ok_or_else(|| Error::format(path, "n_heads must divide d_model"))?;
            let ln = |l: usize, which: &str| -> Result<LayerNorm> {
                Ok(LayerNorm { gamma: r.vector(&format!("blocks.{l}.{which}.gamma"), d)?, beta: r.vector(&format!("blocks.{l}.{which}.beta"), d)? })
            };
            let blocks = (0..m.n_layers)
                .map(|l| {
                    let w_up = r.matrix_any_rows(&format!("blocks.{l}.w_up"), d)?;
                    let hidden = w_up.rows;
                    Ok(TransformerBlock {
                        n_heads,
                        ln1: ln(l, "ln1")?,
                        w_q: r.matrix(&format!("blocks.{l}.w_q"), d, d)?,
                        w_k: r.matrix(&format!("blocks.{l}.w_k"), d, d)?,
                        w_v: r.matrix(&format!("blocks.{l}.w_v"), d, d)?,
                        w_o: r.matrix(&format!("blocks.{l}.w_o"), d, d)?,
                        ln2: ln(l, "ln2")?,
                        b_up: r.vector(&format!("blocks.{l}.b_up"), hidden)?,
                        w_down: r.matrix(&format!("blocks.{l}.w_down"), d, hidden)?,
                        b_down: r.vector(&format!("blocks.{l}.b_down"), d)?,
                        w_up,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ModelBody::Transformer(blocks)
        }
        ModelKind::PlantedLinear => {
            let counts = m.transfers_per_layer.clone().filter(|c| c.len() == m.n_layers).ok_or_else(|| Error::format(path, "transfers_per_layer must list every layer"))?;
            let transfers = counts
                .iter()
                .enumerate()
                .map(|(l, &n)| {
                    let weights = r.vector(&format!("transfers.{l}.weight"), n)?;
                    weights
                        .into_iter()
                        .enumerate()
                        .map(|(i, weight)| {
                            Ok(Transfer {
                                read: r.vector(&format!("transfers.{l}.{i}.read"), d)?,
                                write: r.vector(&format!("transfers.{l}.{i}.write"), d)?,
                                weight,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            ModelBody::Planted(PlantedLayers {
                transfers,
                token_directions: m.token_directions.clone().unwrap_or_default(),
                spec_edges: m.planted_edges.clone().unwrap_or_default(),
            })
        }
    };
    let model = LayeredModel { n_layers: m.n_layers, d_model: d, seed: m.seed, embedding, body };
    if !model_is_finite(&model) {
        return Err(Error::format(path, "model parameters must be finite"));
    }
    Ok(model)
}

fn model_is_finite(m: &LayeredModel) -> bool {
    let e = &m.embedding;
    let mut ok = e.token.is_finite() && e.position.is_finite() && e.value.iter().all(|v| v.is_finite());
    match &m.body {
        ModelBody::Transformer(blocks) => {
            for b in blocks {
                ok &= [&b.w_q, &b.w_k, &b.w_v, &b.w_o, &b.w_up, &b.w_down].iter().all(|w| w.is_finite());
                ok &= [&b.ln1.gamma, &b.ln1.beta, &b.ln2.gamma, &b.ln2.beta, &b.b_up, &b.b_down]
                    .iter()
                    .all(|v| v.iter().all(|x| x.is_finite()));
            }
        }
        ModelBody::Planted(p) => {
            ok &= p.transfers.iter().flatten().all(|t| {
                t.weight.is_finite() && t.read.iter().chain(&t.write).all(|x| x.is_finite())
            });
        }
    }
    ok
}

pub fn write_sae(path: &Path, sae: &SaeDictionary) -> Result<()> {
    let mut w = BlobWriter::default();
    w.matrix("w_enc", &sae.w_enc);
    w.vector("b_enc", &sae.b_enc);
    w.matrix("decoder", &sae.decoder);
    w.vector("b_dec", &sae.b_dec);
    let manifest = SaeManifest {
        format: SAE_FORMAT.into(),
        layer: sae.layer,
        d_model: sae.d_model,
        n_features: sae.n_features,
        k: sae.k,
        blob: blob_name(path),
        tensors: w.entries,
    };
    write_pair(path, &manifest, &w.bytes)
}

/// Loads a dictionary exactly as written; decoder columns are not
/// renormalized.
pub fn read_sae(path: &Path) -> Result<SaeDictionary> {
    let text = fs::read_to_string(path).at(path)?;
    let m: SaeManifest = serde_json::from_str(&text).at(path)?;
    if m.format != SAE_FORMAT {
        return Err(Error::format(path, format!("unsupported SAE format {:?}", m.format)));
    }
    let (d, f) = (m.d_model, m.n_features);
    if d == 0 || m.k == 0 || m.k > f {
        return Err(Error::format(path, format!("invalid SAE dimensions d = {d}, F = {f}, k = {}", m.k)));
    }
    let r = BlobReader { path, bytes: read_blob(path, &m.blob)?, entries: &m.tensors };
    let sae = SaeDictionary {
        layer: m.layer,
        d_model: d,
        n_features: f,
        k: m.k,
        w_enc: r.matrix("w_enc", f, d)?,
        b_enc: r.vector("b_enc", f)?,
        decoder: r.matrix("decoder", f, d)?,
        b_dec: r.vector("b_dec", d)?,
    };
    if !sae.is_finite() {
        return Err(Error::format(path, "SAE parameters must be finite"));
    }
    Ok(sae)
}
