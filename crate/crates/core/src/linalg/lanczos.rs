//! Lanczos iteration with full reorthogonalisation, used to extract the
//! positive part of a symmetric matrix whose positive rank is small.

use alloc::vec;
use alloc::vec::Vec;

use super::eigen::{tridiagonal_eigen, tridiagonal_eigen_last};
use super::matrix::{axpy, dot, Matrix};
use crate::error::Result;
use crate::rng::hash_unit;

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    /// Ritz values above zero, descending.
    pub values: Vec<f64>,
    /// Unit Ritz vectors matching `values`.
    pub vectors: Vec<Vec<f64>>,
    /// Krylov dimension reached.
    pub dim: usize,
    pub converged: bool,
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>], deflate: &[&[f64]]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in deflate.iter().copied().chain(basis.iter().map(Vec::as_slice)) {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = libm::sqrt(dot(v, v));
    if n > 0.0 {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|x| *x *= inv);
    }
    n
}

/// Finds every eigenpair of the symmetric `a` with eigenvalue above zero,
/// restricted to the orthogonal complement of the unit vectors in `deflate`.
///
/// `tol` is an absolute residual tolerance. The run is declared converged
/// once every positive Ritz pair has residual at most `tol` and the next
/// Ritz value below them is within `tol` of the non-positive axis. Returns
/// `converged = false` if `max_dim` is reached first.
pub fn lanczos_positive(
    a: &Matrix,
    start: &[f64],
    deflate: &[&[f64]],
    max_dim: usize,
    tol: f64,
    salt: u64,
) -> Result<LanczosOutcome> {
    let m = a.rows();
    let room = m.saturating_sub(deflate.len());
    let max_dim = max_dim.min(room);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let breakdown = 1e-10 * libm::sqrt(a.as_slice().iter().map(|v| v * v).sum::<f64>()).max(f64::MIN_POSITIVE);

    let mut q = start.to_vec();
    let mut restarts = 0u64;
    orthogonalize(&mut q, &basis, deflate);
    if normalize(&mut q) <= breakdown {
        q = fresh_vector(m, salt, restarts, &basis, deflate);
    }
    let mut w = vec![0.0; m];
    let mut next_check = 8usize.min(max_dim);
    let mut just_restarted = false;
    let mut outcome = LanczosOutcome { values: Vec::new(), vectors: Vec::new(), dim: 0, converged: false };
    if max_dim == 0 {
        outcome.converged = true;
        return Ok(outcome);
    }

    loop {
        a.matvec_into(&q, &mut w);
        let a_j = dot(&q, &w);
        axpy(-a_j, &q, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(q);
        alpha.push(a_j);
        orthogonalize(&mut w, &basis, deflate);
        let mut b_j = normalize(&mut w);
        let j = basis.len();

        let exhausted = j >= max_dim;
        let broke = b_j <= breakdown;
        if j >= next_check || exhausted || broke {
            next_check = j + 4.max(j / 4);
            let (theta, last) = tridiagonal_eigen_last(&alpha, &beta)?;
            // Scanning from the top: every positive Ritz pair must have
            // converged, and the first non-positive one must be certified
            // non-positive (theta + residual <= tol).
            // With no non-positive pair the Krylov space must fill the room.
            let mut ok = j >= room;
            for i in (0..theta.len()).rev() {
                let res = b_j * last[i].abs();
                if theta[i] > 0.0 {
                    if res > tol {
                        ok = false;
                        break;
                    }
                } else {
                    ok = theta[i] + res <= tol;
                    break;
                }
            }
            // A breakdown yields an exact invariant subspace; it is only the
            // whole story if the complement has been exhausted too.
            // A fresh random vector that is annihilated without showing a
            // positive Rayleigh quotient means nothing positive is left.
            let settled = broke && just_restarted && a_j <= tol;
            if ok && (!broke || j >= room || settled) {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
                outcome = assemble(&theta, &s, &basis, j, m);
                outcome.converged = true;
                return Ok(outcome);
            }
            if exhausted {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
                outcome = assemble(&theta, &s, &basis, j, m);
                return Ok(outcome);
            }
        }
        if broke {
            if j >= room {
                let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
                outcome = assemble(&theta, &s, &basis, j, m);
                outcome.converged = true;
                return Ok(outcome);
            }
            restarts += 1;
            w = fresh_vector(m, salt, restarts, &basis, deflate);
            b_j = 0.0;
        }
        just_restarted = broke;
        beta.push(b_j);
        q = w;
        w = vec![0.0; m];
    }
}

fn fresh_vector(m: usize, salt: u64, restart: u64, basis: &[Vec<f64>], deflate: &[&[f64]]) -> Vec<f64> {
    let mut attempt = 0u64;
    loop {
        let key = salt ^ (restart << 32) ^ attempt;
        let mut v: Vec<f64> = (0..m as u64).map(|i| hash_unit(key, i)).collect();
        orthogonalize(&mut v, basis, deflate);
        if normalize(&mut v) > 1e-8 {
            return v;
        }
        attempt += 1;
    }
}

fn assemble(theta: &[f64], s: &Matrix, basis: &[Vec<f64>], j: usize, m: usize) -> LanczosOutcome {
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for i in (0..theta.len()).rev() {
        if theta[i] <= 0.0 {
            break;
        }
        let mut v = vec![0.0; m];
        for (k, qk) in basis.iter().enumerate() {
            axpy(s[(i, k)], qk, &mut v);
        }
        normalize(&mut v);
        values.push(theta[i]);
        vectors.push(v);
    }
    LanczosOutcome { values, vectors, dim: j, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;

    #[test]
    fn recovers_low_rank_positive_part() {
        // A = sum_i l_i u_i u_i^T with two positive and many negative terms
        let m = 60;
        let eig_src = {
            let mut rng = crate::rng::stream(11, &[]);
            use rand::Rng;
            let mut g = Matrix::zeros(m, m);
            for i in 0..m {
                for j in 0..=i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            symmetric_eigen(&g, true).unwrap().vectors.unwrap()
        };
        let mut lambdas = vec![0.0; m];
        for (i, l) in lambdas.iter_mut().enumerate() {
            *l = -1.0 - i as f64 * 0.1;
        }
        lambdas[0] = 5.0;
        lambdas[1] = 2.5;
        let mut a = Matrix::zeros(m, m);
        for r in 0..m {
            let u = eig_src.row(r);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] += lambdas[r] * u[i] * u[j];
                }
            }
        }
        let start: Vec<f64> = (0..m).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let out = lanczos_positive(&a, &start, &[], m, 1e-10, 3).unwrap();
        assert!(out.converged);
        assert_eq!(out.values.len(), 2);
        assert!((out.values[0] - 5.0).abs() < 1e-9);
        assert!((out.values[1] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn handles_repeated_eigenvalue_by_restart() {
        // identity on the complement of the deflated direction
        let m = 10;
        let a = Matrix::identity(m);
        let ones: Vec<f64> = vec![1.0 / libm::sqrt(m as f64); m];
        let start = vec![1.0; m];
        let out = lanczos_positive(&a, &start, &[&ones], m, 1e-10, 1).unwrap();
        assert!(out.converged);
        assert_eq!(out.values.len(), m - 1);
        for v in &out.vectors {
            assert!(dot(v, &ones).abs() < 1e-10);
        }
    }
}
