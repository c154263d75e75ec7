// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense row-major `f32` matrices and the handful of kernels the models need.

use alloc::vec;
use alloc::vec::Vec;


use crate::rng::{normal_f32, ChaCha8Rng};
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Entries drawn i.i.d. from N(0, scale²).
    pub fn random_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f32) -> Self {
        let data = (0..rows * cols).map(|_| normal_f32(rng) * scale).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `out = self · x`.
    pub fn matvec_into(&self, x: &[f32], out: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    pub fn matvec(&self, x: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, b) in out.row_mut(r).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Scales every column to unit L2 norm. Zero columns are left untouched.
    pub fn normalize_columns(&mut self) {
        for c in 0..self.cols {
            let norm = (0..self.rows)
                .map(|r| {
                    let v = self.get(r, c) as f64;
                    v * v
                })
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for r in 0..self.rows {
                    let v = (self.get(r, c) as f64 / norm) as f32;
                    self.set(r, c, v);
                }
            }
        }
    }

    pub fn max_column_norm_error(&self) -> f64 {
        (0..self.cols)
            .map(|c| {
                let n = (0..self.rows)
                    .map(|r| {
                        let v = self.get(r, c) as f64;
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                (n - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent partial sums let the optimizer vectorize.
    let mut acc = [0.0f32; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in chunks * 4..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `n` orthonormal vectors in R^d (n ≤ d), Gram-Schmidt on Gaussian draws in f64.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f32>> {
    assert!(n <= d, "cannot draw {n} orthonormal vectors in R^{d}");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| normal_f32(rng) as f64).collect();
        // Two passes of classical Gram-Schmidt keep the f32 result orthogonal to ~1e-7.
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis.into_iter().map(|b| b.into_iter().map(|x| x as f32).collect()).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal_f32(rng) as f64).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn orthonormal_draws() {
        let mut rng = seeded(3, 0);
        let b = random_orthonormal(&mut rng, 16, 16);
        for i in 0..16 {
            for j in 0..16 {
                let p = dot(&b[i], &b[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-5, "({i},{j}) -> {p}");
            }
        }
    }

    #[test]
    fn matmul_identity() {
        let mut rng = seeded(1, 0);
        let a = Matrix::random_normal(&mut rng, 3, 5, 1.0);
        assert_eq!(Matrix::identity(3).matmul(&a), a);
        assert_eq!(a.transpose().transpose(), a);
    }
}
