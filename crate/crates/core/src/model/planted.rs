// SPDX-License-Identifier: MIT OR Apache-2.0

//! Planted-linear models: residual identity maps plus a known set of
//! rank-one feature-to-feature transfers. They provide ground truth for
//! circuit recovery.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Embedding, EmbeddingMode, LayeredModel, ModelBody};
use crate::error::{config_err, Result};
use crate::feature::FeatureId;
use crate::linalg::{axpy, dot, random_orthonormal, Matrix};
use crate::rng::{seeded, shuffle};

const ORTHO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantedEdge {
    pub source: FeatureId,
    pub target: FeatureId,
    pub weight: f32,
}

/// Ground-truth circuit description.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    /// Per-layer decoder directions, `[d × n_dirs]`, one direction per column.
    pub bases: Vec<Matrix>,
    pub edges: Vec<PlantedEdge>,
    /// Direction indices reserved for realizing edges that skip layers.
    pub relay_directions: Vec<usize>,
    /// Token vocabulary of the embedding, including the padding token 0.
    pub vocab: usize,
}

impl PlantedSpec {
    /// Random adjacent-layer fixture: one orthonormal basis shared by every
    /// layer, `n_edges` spread evenly over the `n_layers - 1` transitions,
    /// weights uniform in `weight_range`. Within a transition sources are
    /// distinct, targets are distinct, and no direction is both.
    ///
    /// With `max_active = Some(m)`, edges are chosen so that a position
    /// holding a single token direction never carries more than `m` planted
    /// directions at any layer.
    pub fn random_adjacent(
        seed: u64,
        n_layers: usize,
        d: usize,
        n_edges: usize,
        weight_range: (f32, f32),
        vocab: usize,
        max_active: Option<usize>,
    ) -> Result<Self> {
        if n_layers < 2 {
            return Err(config_err!("planted fixture needs at least 2 layers"));
        }
        let transitions = n_layers - 1;
        let per = n_edges.div_ceil(transitions);
        if per * 2 > d {
            return Err(config_err!("{n_edges} edges do not fit in d = {d} over {transitions} transitions"));
        }
        let cap = max_active.unwrap_or(usize::MAX);
        let mut rng = seeded(seed, 0x91a7);
        let basis = random_orthonormal(&mut rng, d, d);
        let mut m = Matrix::zeros(d, d);
        for (c, dir) in basis.iter().enumerate() {
            for (r, v) in dir.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        // active[a][i]: direction i is present at a position whose token is a.
        let mut active: Vec<Vec<bool>> = (0..d).map(|a| (0..d).map(|i| i == a).collect()).collect();
        let mut edges = Vec::with_capacity(n_edges);
        let (lo, hi) = weight_range;
        for t in 0..transitions {
            let take = per.min(n_edges - edges.len());
            let mut picked = None;
            for _ in 0..1000 {
                if let Some(p) = pick_transition(&mut rng, &active, take, cap) {
                    picked = Some(p);
                    break;
                }
            }
            let pairs = picked.ok_or_else(|| {
                config_err!("no edge set for transition {t} keeps positions within {cap} directions")
            })?;
            let before = active.clone();
            for &(s, tg) in &pairs {
                for (a, row) in before.iter().enumerate() {
                    if row[s] {
                        active[a][tg] = true;
                    }
                }
                edges.push(PlantedEdge {
                    source: FeatureId::new(t, s),
                    target: FeatureId::new(t + 1, tg),
                    weight: rng.random_range(lo..=hi),
                });
            }
        }
        Ok(Self { bases: vec![m; n_layers], edges, relay_directions: Vec::new(), vocab })
    }
}

/// Greedy random choice of `take` (source, target) pairs for one transition.
fn pick_transition(
    rng: &mut crate::rng::ChaCha8Rng,
    active: &[Vec<bool>],
    take: usize,
    cap: usize,
) -> Option<Vec<(usize, usize)>> {
    let d = active.len();
    let mut sources: Vec<usize> = (0..d).collect();
    let mut targets: Vec<usize> = (0..d).collect();
    shuffle(rng, &mut sources);
    shuffle(rng, &mut targets);
    let mut size: Vec<usize> = active.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let mut pending = vec![vec![false; d]; d];
    let mut used = vec![false; d];
    let mut pairs = Vec::with_capacity(take);
    for &s in &sources {
        if pairs.len() == take {
            break;
        }
        if used[s] {
            continue;
        }
        let reach: Vec<usize> = (0..d).filter(|&a| active[a][s]).collect();
        let fits = |tg: usize, size: &[usize], pending: &[Vec<bool>]| {
            reach.iter().all(|&a| active[a][tg] || pending[a][tg] || size[a] < cap)
        };
        if let Some(&tg) = targets.iter().find(|&&tg| tg != s && !used[tg] && fits(tg, &size, &pending)) {
            for &a in &reach {
                if !active[a][tg] && !pending[a][tg] {
                    pending[a][tg] = true;
                    size[a] += 1;
                }
            }
            used[s] = true;
            used[tg] = true;
            pairs.push((s, tg));
        }
    }
    (pairs.len() == take).then_some(pairs)
}

/// Rank-one update `x += weight · ⟨x, read⟩ · write`, evaluated on the
/// pre-transition state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub read: Vec<f32>,
    pub write: Vec<f32>,
    pub weight: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedLayers {
    /// `transfers[ℓ]` is applied by layer ℓ; layer 0 is always the identity.
    pub transfers: Vec<Vec<Transfer>>,
    /// Layer-0 basis direction excited by each token (`None` for padding).
    pub token_directions: Vec<Option<usize>>,
    pub spec_edges: Vec<PlantedEdge>,
}

impl PlantedLayers {
    pub(crate) fn apply(&self, layer: usize, x: &mut [f32], d: usize) {
        let transfers = &self.transfers[layer];
        if transfers.is_empty() {
            return;
        }
        let mut coeffs = vec![0.0f32; transfers.len()];
        for row in x.chunks_exact_mut(d) {
            for (c, t) in coeffs.iter_mut().zip(transfers) {
                *c = t.weight * dot(row, &t.read);
            }
            for (c, t) in coeffs.iter().zip(transfers) {
                axpy(*c, &t.write, row);
            }
        }
    }

    /// Dense `d × d` matrix of layer `layer`: `I + Σ weight · write · readᵀ`.
    pub fn transition_matrix(&self, layer: usize, d: usize) -> Matrix {
        let mut m = Matrix::identity(d);
        for t in &self.transfers[layer] {
            for r in 0..d {
                for c in 0..d {
                    let v = m.get(r, c) + t.weight * t.write[r] * t.read[c];
                    m.set(r, c, v);
                }
            }
        }
        m
    }
}

fn validate_basis(layer: usize, b: &Matrix, d: usize) -> Result<()> {
    if b.rows != d {
        return Err(config_err!("basis at layer {layer} has {} rows, expected {d}", b.rows));
    }
    for i in 0..b.cols {
        for j in i..b.cols {
            let p: f64 = (0..d).map(|r| b.get(r, i) as f64 * b.get(r, j) as f64).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (p - want).abs() > ORTHO_TOL {
                return Err(config_err!(
                    "basis at layer {layer} is not orthonormal: <{i},{j}> = {p}"
                ));
            }
        }
    }
    Ok(())
}

/// Builds a planted-linear model.
///
/// Layer ℓ ≥ 1 computes `h' = h + Σ w · ⟨h, dir_s⟩ · dir_t` over the edges
/// `s@ℓ-1 → t@ℓ`; everything else passes through unchanged. An edge spanning
/// `m ≥ 2` layers writes into a reserved relay direction at `source + 1` and
/// is read back out, with weight 1, by the layer at `target`; the residual
/// stream carries the relay in between.
///
/// The embedding maps each non-padding token to one layer-0 direction (never
/// a relay), scaled by the token's expression value. `seed` shuffles that
/// assignment.
pub fn build_planted_model(
    spec: &PlantedSpec,
    n_layers: usize,
    d_model: usize,
    seed: u64,
) -> Result<LayeredModel> {
    if n_layers < 2 || d_model == 0 {
        return Err(config_err!("planted model needs at least 2 layers and d_model > 0"));
    }
    if spec.bases.len() != n_layers {
        return Err(config_err!("spec has {} bases for {n_layers} layers", spec.bases.len()));
    }
    for (l, b) in spec.bases.iter().enumerate() {
        validate_basis(l, b, d_model)?;
    }
    let n_dirs = |layer: usize| spec.bases[layer].cols;
    for &r in &spec.relay_directions {
        if spec.bases.iter().any(|b| r >= b.cols) {
            return Err(config_err!("relay direction {r} out of range"));
        }
    }
    let is_relay = |i: usize| spec.relay_directions.contains(&i);

    let mut transfers: Vec<Vec<Transfer>> = vec![Vec::new(); n_layers];
    let mut relays = spec.relay_directions.iter().copied();
    for e in &spec.edges {
        let (s, t) = (e.source, e.target);
        if s.layer >= t.layer || t.layer >= n_layers {
            return Err(config_err!("edge {s} -> {t} must go forward within {n_layers} layers"));
        }
        if s.index >= n_dirs(s.layer) || t.index >= n_dirs(t.layer) {
            return Err(config_err!("edge {s} -> {t} references a missing direction"));
        }
        if is_relay(s.index) || is_relay(t.index) {
            return Err(config_err!("edge {s} -> {t} uses a reserved relay direction"));
        }
        if !e.weight.is_finite() || e.weight == 0.0 {
            return Err(config_err!("edge {s} -> {t} has invalid weight {}", e.weight));
        }
        let read = spec.bases[s.layer].column(s.index);
        let write = spec.bases[t.layer].column(t.index);
        if t.layer == s.layer + 1 {
            transfers[t.layer].push(Transfer { read, write, weight: e.weight });
        } else {
            let r = relays
                .next()
                .ok_or_else(|| config_err!("not enough relay directions for skip edge {s} -> {t}"))?;
            let relay = spec.bases[s.layer + 1].column(r);
            transfers[s.layer + 1].push(Transfer { read, write: relay.clone(), weight: e.weight });
            transfers[t.layer].push(Transfer { read: relay, write, weight: 1.0 });
        }
    }

    let mut dirs: Vec<usize> = (0..n_dirs(0)).filter(|&i| !is_relay(i)).collect();
    if dirs.is_empty() {
        return Err(config_err!("no non-relay directions available for the embedding"));
    }
    let mut rng = seeded(seed, 0xe3b);
    shuffle(&mut rng, &mut dirs);
    let vocab = spec.vocab.max(1);
    let mut token = Matrix::zeros(vocab, d_model);
    let mut token_directions = vec![None; vocab];
    for v in 1..vocab {
        let dir = dirs[(v - 1) % dirs.len()];
        token_directions[v] = Some(dir);
        token.row_mut(v).copy_from_slice(&spec.bases[0].column(dir));
    }

    Ok(LayeredModel {
        n_layers,
        d_model,
        seed,
        embedding: Embedding {
            mode: EmbeddingMode::ValueScaled,
            token,
            value: vec![0.0; d_model],
            position: Matrix::zeros(0, d_model),
        },
        body: ModelBody::Planted(PlantedLayers {
            transfers,
            token_directions,
            spec_edges: spec.edges.clone(),
        }),
    })
}

/// Dense map from a state change at layer `from` to the resulting change at
/// layer `to > from`: the product of the intermediate transition matrices.
pub fn chained_map(layers: &PlantedLayers, from: usize, to: usize, d: usize) -> Matrix {
    let mut m = Matrix::identity(d);
    for l in from + 1..=to {
        m = layers.transition_matrix(l, d).matmul(&m);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward_clean, forward_from, Cell, HiddenState};

    fn identity_basis(d: usize, layers: usize) -> Vec<Matrix> {
        vec![Matrix::identity(d); layers]
    }

    fn cell(tokens: &[u32]) -> Cell {
        Cell {
            tokens: tokens.to_vec(),
            values: tokens.iter().map(|_| 1.5).collect(),
            padding: tokens.iter().map(|t| *t == 0).collect(),
            cluster: 0,
        }
    }

    #[test]
    fn no_edges_is_identity() {
        let spec = PlantedSpec { bases: identity_basis(8, 4), edges: vec![], relay_directions: vec![], vocab: 9 };
        let m = build_planted_model(&spec, 4, 8, 1).unwrap();
        let states = forward_clean(&m, &cell(&[1, 2, 3, 0])).unwrap();
        assert_eq!(states.len(), 4);
        for s in &states[1..] {
            assert_eq!(s.data, states[0].data);
        }
    }

    #[test]
    fn single_edge_transfer() {
        let spec = PlantedSpec {
            bases: identity_basis(8, 3),
            edges: vec![PlantedEdge { source: FeatureId::new(0, 3), target: FeatureId::new(1, 5), weight: 0.8 }],
            relay_directions: vec![],
            vocab: 2,
        };
        let m = build_planted_model(&spec, 3, 8, 0).unwrap();
        let mut h = HiddenState::new(0, 1, 8, vec![0.0; 8]);
        h.data[3] = 2.0;
        h.data[0] = 0.25;
        let out = forward_from(&m, &h, &[false]).unwrap();
        let mut want = h.data.clone();
        want[5] += 1.6;
        assert!((out[0].data[5] - 1.6).abs() < 1e-6);
        assert_eq!(out[0].data, want);
        // Carried unchanged through the edge-free last layer.
        assert_eq!(out[1].data, want);
    }

    #[test]
    fn skip_edge_uses_relay() {
        let spec = PlantedSpec {
            bases: identity_basis(6, 4),
            edges: vec![PlantedEdge { source: FeatureId::new(0, 1), target: FeatureId::new(3, 2), weight: 0.5 }],
            relay_directions: vec![5],
            vocab: 2,
        };
        let m = build_planted_model(&spec, 4, 6, 0).unwrap();
        let mut h = HiddenState::new(0, 1, 6, vec![0.0; 6]);
        h.data[1] = 4.0;
        let out = forward_from(&m, &h, &[false]).unwrap();
        assert_eq!(out[0].data[5], 2.0); // relay written at layer 1
        assert_eq!(out[1].data[2], 0.0);
        assert_eq!(out[2].data[2], 2.0); // read out at layer 3

        let no_relay = PlantedSpec { relay_directions: vec![], ..spec };
        assert!(build_planted_model(&no_relay, 4, 6, 0).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = PlantedSpec {
            bases: identity_basis(4, 3),
            edges: vec![PlantedEdge { source: FeatureId::new(1, 0), target: FeatureId::new(1, 1), weight: 1.0 }],
            relay_directions: vec![],
            vocab: 3,
        };
        assert!(build_planted_model(&spec, 3, 4, 0).is_err());
        spec.edges[0] = PlantedEdge { source: FeatureId::new(0, 0), target: FeatureId::new(1, 9), weight: 1.0 };
        assert!(build_planted_model(&spec, 3, 4, 0).is_err());
        spec.edges[0] = PlantedEdge { source: FeatureId::new(0, 0), target: FeatureId::new(1, 1), weight: 0.0 };
        assert!(build_planted_model(&spec, 3, 4, 0).is_err());
        spec.edges.clear();
        spec.bases[1].set(0, 0, 2.0);
        assert!(build_planted_model(&spec, 3, 4, 0).is_err());
    }

    #[test]
    fn random_fixture_shape() {
        let spec = PlantedSpec::random_adjacent(7, 6, 32, 50, (0.5, 2.0), 65, None).unwrap();
        assert_eq!(spec.edges.len(), 50);
        for e in &spec.edges {
            assert_eq!(e.target.layer, e.source.layer + 1);
            assert!((0.5..=2.0).contains(&e.weight));
            assert_ne!(e.source.index, e.target.index);
        }
        assert!(build_planted_model(&spec, 6, 32, 7).is_ok());
    }
}
