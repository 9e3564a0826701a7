//! Projection onto the positive semidefinite cone.

use alloc::vec;
use alloc::vec::Vec;

use super::eigen::symmetric_eigen;
use super::lanczos::lanczos_positive;
use super::matrix::{dot, Matrix};
use crate::error::Result;
use crate::rng::hash_unit;

/// Exact Frobenius projection: eigendecompose and clip negative eigenvalues.
pub fn project_psd(a: &Matrix) -> Result<Matrix> {
    let eig = symmetric_eigen(a, true)?;
    let vectors = eig.vectors.expect("vectors requested");
    let pairs: Vec<(f64, &[f64])> =
        eig.values.iter().enumerate().filter(|(_, &l)| l > 0.0).map(|(i, &l)| (l, vectors.row(i))).collect();
    Ok(outer_sum(a.rows(), pairs.into_iter()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(a, false)?.values.first().copied().unwrap_or(0.0))
}

fn outer_sum<'a>(m: usize, pairs: impl Iterator<Item = (f64, &'a [f64])>) -> Matrix {
    let mut out = Matrix::zeros(m, m);
    for (l, v) in pairs {
        for i in 0..m {
            let li = l * v[i];
            if li == 0.0 {
                continue;
            }
            let row = &mut out.as_mut_slice()[i * m..(i + 1) * m];
            for (r, &vj) in row[i..].iter_mut().zip(&v[i..]) {
                *r += li * vj;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// Stateful PSD projector for a sequence of slowly changing matrices.
///
/// Uses Lanczos, warm-started from the previous positive eigenvectors, while
/// the positive rank stays small and falls back to the dense solver
/// otherwise.
#[derive(Debug, Clone)]
pub struct PsdProjector {
    /// Absolute residual tolerance is `rel_tol * ||A||_F`.
    pub rel_tol: f64,
    /// Dense path below this size.
    pub dense_below: usize,
    warm: Option<Vec<f64>>,
    prev_rank: Option<usize>,
    /// Krylov dimension of the last successful run, or a larger request
    /// after a failure.
    want_dim: Option<usize>,
    /// Dense calls left before Lanczos is tried again.
    skip: u32,
    fail_streak: u32,
    calls: u64,
    pub dense_calls: u64,
    pub lanczos_calls: u64,
}

impl Default for PsdProjector {
    fn default() -> Self {
        PsdProjector {
            rel_tol: 1e-10,
            dense_below: 96,
            warm: None,
            prev_rank: None,
            want_dim: None,
            skip: 0,
            fail_streak: 0,
            calls: 0,
            dense_calls: 0,
            lanczos_calls: 0,
        }
    }
}

impl PsdProjector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Projects `a` onto the PSD cone. When `ones_null` is set the caller
    /// guarantees `a 1 = 0`, and the all-ones direction is skipped.
    /// Returns the projection and its rank.
    pub fn project(&mut self, a: &Matrix, ones_null: bool) -> Result<(Matrix, usize)> {
        let m = a.rows();
        self.calls += 1;
        let mut use_dense = m < self.dense_below || self.prev_rank.map_or(true, |r| 6 * r > m);
        if !use_dense && self.skip > 0 {
            self.skip -= 1;
            use_dense = true;
        }
        if !use_dense {
            if let Some(res) = self.try_lanczos(a, ones_null)? {
                self.lanczos_calls += 1;
                return Ok(res);
            }
        }
        self.dense_calls += 1;
        let eig = symmetric_eigen(a, true)?;
        let vectors = eig.vectors.expect("vectors requested");
        let scale = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let cut = self.rel_tol * scale;
        let mut warm = vec![0.0; m];
        let mut rank = 0;
        let mut pairs = Vec::new();
        for (i, &l) in eig.values.iter().enumerate() {
            if l > 0.0 {
                pairs.push((l, vectors.row(i)));
                if l > cut {
                    rank += 1;
                    super::matrix::axpy(1.0, vectors.row(i), &mut warm);
                }
            }
        }
        self.warm = Some(warm);
        self.prev_rank = Some(rank);
        Ok((outer_sum(m, pairs.into_iter()), rank))
    }

    fn try_lanczos(&mut self, a: &Matrix, ones_null: bool) -> Result<Option<(Matrix, usize)>> {
        let m = a.rows();
        let ones = vec![1.0 / libm::sqrt(m as f64); m];
        let deflate: Vec<&[f64]> = if ones_null { vec![&ones[..]] } else { Vec::new() };
        let salt = 0xA5A5_0000 ^ self.calls;
        let mut start: Vec<f64> = (0..m as u64).map(|i| 1e-3 * hash_unit(salt, i)).collect();
        if let Some(w) = &self.warm {
            let wn = libm::sqrt(dot(w, w));
            if wn > 0.0 {
                for (s, x) in start.iter_mut().zip(w) {
                    *s += x / wn;
                }
            }
        }
        let prev = self.prev_rank.unwrap_or(0);
        let cap = (m / 2).max(8);
        let want = self.want_dim.map_or(0, |d| d + d / 4 + 8);
        let max_dim = (4 * prev + 48).max(want).min(cap).max(8);
        let tol = self.rel_tol * a.frobenius_norm().max(f64::MIN_POSITIVE);
        let out = lanczos_positive(a, &start, &deflate, max_dim, tol, salt)?;
        if !out.converged {
            self.want_dim = Some(2 * max_dim);
            if max_dim >= cap {
                self.fail_streak += 1;
                self.skip = 1 << self.fail_streak.min(4);
            }
            return Ok(None);
        }
        self.want_dim = Some(out.dim);
        self.fail_streak = 0;
        let mut warm = vec![0.0; m];
        for v in &out.vectors {
            super::matrix::axpy(1.0, v, &mut warm);
        }
        let rank = out.values.len();
        self.warm = Some(warm);
        self.prev_rank = Some(rank);
        let proj = outer_sum(m, out.values.iter().copied().zip(out.vectors.iter().map(Vec::as_slice)));
        Ok(Some((proj, rank)))
    }
}
