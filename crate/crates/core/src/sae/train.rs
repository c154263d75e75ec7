// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{top_k_positive, SaeDictionary, SparseCode};
use crate::error::{config_err, Error, Result};
use crate::linalg::{axpy, dot, random_unit, Matrix};
use crate::rng::seeded;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer: usize,
    pub n_features: usize,
    pub k: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Full-data loss is recorded every this many steps (and at the end).
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn new(n_features: usize, k: usize, steps: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            layer: 0,
            n_features,
            k,
            steps,
            learning_rate,
            batch_size: 64,
            seed,
            eval_every: (steps / 20).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedSae {
    pub sae: SaeDictionary,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `(step, full-data loss)` checkpoints, starting at step 0.
    pub history: Vec<(usize, f64)>,
}

/// Mean squared reconstruction error per element over all rows.
pub fn reconstruction_loss(sae: &SaeDictionary, data: &Matrix) -> f64 {
    let mut total = 0.0f64;
    for r in 0..data.rows {
        let x = data.row(r);
        let xh = sae.reconstruct(x);
        total += x.iter().zip(&xh).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>();
    }
    total / (data.rows * data.cols) as f64
}

/// Adam moment buffers for one flat parameter block.
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, params: &mut [f32], grad: &[f64], lr: f64, t: i32) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - B1.powi(t);
        let c2 = 1.0 - B2.powi(t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let update = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
            params[i] = (params[i] as f64 - update) as f32;
        }
    }
}

/// Trains a TopK SAE on the rows of `data` (`[N × d]`) by minibatch
/// gradient descent with Adam updates.
///
/// Gradients reach only the `k` active units of each sample (the TopK mask
/// is treated as constant). Decoder columns are renormalized after every
/// step. `steps = 0` returns the seeded initialization untouched.
pub fn train_sae(data: &Matrix, cfg: &TrainConfig) -> Result<TrainedSae> {
    let (n, d) = (data.rows, data.cols);
    let f = cfg.n_features;
    if n == 0 || d == 0 {
        return Err(config_err!("training data must be non-empty"));
    }
    if cfg.k == 0 || cfg.k > f {
        return Err(config_err!("k = {} must lie in 1..={f}", cfg.k));
    }
    if !data.is_finite() {
        return Err(config_err!("training data must be finite"));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(config_err!("batch_size and learning_rate must be positive"));
    }

    let mut rng = seeded(cfg.seed, 0x7a11);
    let mut decoder = Matrix::zeros(f, d);
    for c in 0..f {
        decoder.row_mut(c).copy_from_slice(&random_unit(&mut rng, d));
    }
    let mut mean = vec![0.0f32; d];
    for r in 0..n {
        axpy(1.0 / n as f32, data.row(r), &mut mean);
    }
    let mut sae = SaeDictionary {
        layer: cfg.layer,
        d_model: d,
        n_features: f,
        k: cfg.k,
        w_enc: decoder.clone(),
        b_enc: vec![0.0; f],
        decoder,
        b_dec: mean,
    };

    let initial_loss = reconstruction_loss(&sae, data);
    let mut history = vec![(0, initial_loss)];
    if cfg.steps == 0 {
        return Ok(TrainedSae { sae, initial_loss, final_loss: initial_loss, history });
    }

    let mut m_enc = Moments::new(f * d);
    let mut m_benc = Moments::new(f);
    let mut m_dec = Moments::new(f * d);
    let mut m_bdec = Moments::new(d);

    let mut g_enc = vec![0.0f64; f * d];
    let mut g_benc = vec![0.0f64; f];
    let mut g_dec = vec![0.0f64; f * d];
    let mut g_bdec = vec![0.0f64; d];
    let mut pre = vec![0.0f32; f];
    let mut code = SparseCode::default();
    let mut err = vec![0.0f32; d];

    for step in 1..=cfg.steps {
        g_enc.iter_mut().for_each(|g| *g = 0.0);
        g_benc.iter_mut().for_each(|g| *g = 0.0);
        g_dec.iter_mut().for_each(|g| *g = 0.0);
        g_bdec.iter_mut().for_each(|g| *g = 0.0);
        let scale = 2.0 / (cfg.batch_size * d) as f64;

        for _ in 0..cfg.batch_size {
            let x = data.row(rng.random_range(0..n));
            sae.pre_activations(x, &mut pre);
            top_k_positive(&pre, sae.k, &mut code);
            let xh = sae.decode(&code);
            for i in 0..d {
                err[i] = xh[i] - x[i];
                g_bdec[i] += scale * err[i] as f64;
            }
            for (&i, &z) in code.indices.iter().zip(&code.values) {
                let i = i as usize;
                let col = sae.decoder_column(i);
                let dz = scale * dot(col, &err) as f64;
                g_benc[i] += dz;
                let ge = &mut g_enc[i * d..(i + 1) * d];
                let gd = &mut g_dec[i * d..(i + 1) * d];
                for j in 0..d {
                    ge[j] += dz * x[j] as f64;
                    gd[j] += scale * err[j] as f64 * z as f64;
                }
            }
        }

        let t = step as i32;
        let lr = cfg.learning_rate;
        m_enc.step(&mut sae.w_enc.data, &g_enc, lr, t);
        m_benc.step(&mut sae.b_enc, &g_benc, lr, t);
        m_dec.step(&mut sae.decoder.data, &g_dec, lr, t);
        m_bdec.step(&mut sae.b_dec, &g_bdec, lr, t);
        sae.decoder.normalize_columns_as_rows();

        if step % cfg.eval_every == 0 || step == cfg.steps {
            let loss = reconstruction_loss(&sae, data);
            if !loss.is_finite() || !sae.is_finite() {
                return Err(Error::Training { step, loss });
            }
            history.push((step, loss));
        }
    }
    let final_loss = history.last().map(|h| h.1).unwrap_or(initial_loss);
    Ok(TrainedSae { sae, initial_loss, final_loss, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    /// Rows are `W · z` for random unit `W` and k-sparse non-negative `z`.
    fn sparse_data(seed: u64, n: usize, d: usize, f: usize, k: usize) -> Matrix {
        let mut rng = seeded(seed, 1);
        let w: Vec<Vec<f32>> = (0..f).map(|_| random_unit(&mut rng, d)).collect();
        let mut data = Matrix::zeros(n, d);
        for r in 0..n {
            for _ in 0..k {
                let i = rng.random_range(0..f);
                let a: f32 = rng.random_range(0.5..2.0);
                axpy(a, &w[i], data.row_mut(r));
            }
        }
        data
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let data = sparse_data(1, 50, 8, 16, 2);
        let cfg = TrainConfig::new(16, 2, 0, 1e-2, 5);
        let a = train_sae(&data, &cfg).unwrap();
        let b = train_sae(&data, &cfg).unwrap();
        assert_eq!(a.sae, b.sae);
        assert_eq!(a.final_loss, a.initial_loss);
        assert_eq!(a.history.len(), 1);
    }

    #[test]
    fn training_reduces_loss_tenfold() {
        let data = sparse_data(2, 2000, 32, 32, 3);
        let cfg = TrainConfig::new(32, 3, 3000, 5e-3, 11);
        let out = train_sae(&data, &cfg).unwrap();
        assert!(
            out.final_loss < 0.1 * out.initial_loss,
            "initial {} final {}",
            out.initial_loss,
            out.final_loss
        );
        assert!(out.sae.decoder_norm_error() <= 1e-6);
        // Each recorded loss stays within 5% of the best seen so far.
        let mut best = f64::INFINITY;
        for &(step, loss) in &out.history {
            assert!(loss <= best * 1.05 || step == 0, "step {step}: {loss} vs best {best}");
            best = best.min(loss);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let data = Matrix::zeros(0, 4);
        assert!(train_sae(&data, &TrainConfig::new(8, 2, 10, 1e-2, 0)).is_err());
        let mut data = Matrix::zeros(3, 4);
        data.data[0] = f32::NAN;
        assert!(train_sae(&data, &TrainConfig::new(8, 2, 10, 1e-2, 0)).is_err());
    }
}
