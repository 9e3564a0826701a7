//! ADMM for
//!
//! ```text
//! max <K, X>  s.t.  X PSD, X >= 0, X 1 = (m/k) 1, diag(X) = 1
//! ```
//!
//! split as `X in C1 = {X PSD, X 1 = c 1}` and `Z in C2 = {X >= 0,
//! diag(X) = 1}` with the consensus constraint `X = Z`. Both projections
//! are exact: on C1 the all-ones direction decouples, leaving a PSD
//! projection of the doubly centred matrix; on C2 the constraints are
//! entrywise.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lambda_min, Matrix, PsdProjector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Initial penalty.
    pub penalty: f64,
    /// Penalty is rebalanced every this many iterations (0 disables).
    pub adapt_every: usize,
    /// Shift the output toward the interior so that it is PSD.
    pub repair: bool,
    /// Also require `||X - Z||_F <= feas_tol` before stopping. This bounds
    /// the PSD and row-sum violations of the returned `Z` (for `k <= sqrt m`).
    pub feas_tol: Option<f64>,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-6, max_iter: 5000, relaxation: 1.6, penalty: 1.0, adapt_every: 10, repair: false, feas_tol: Some(1e-5) }
    }
}

/// Constraint violations of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `max_i |X_ii - 1|`.
    pub diag: f64,
    /// `max(0, -min_ij X_ij)`.
    pub nonneg: f64,
    /// `max_i |(X 1)_i - m/k| / (m/k)`.
    pub rowsum: f64,
    /// `max(0, -lambda_min(X))`.
    pub psd: f64,
}

impl Feasibility {
    pub fn worst(&self) -> f64 {
        self.diag.max(self.nonneg).max(self.rowsum).max(self.psd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub x_hat: Matrix,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `<K, X_hat>` on the caller's matrix.
    pub objective: f64,
    pub feasibility: Feasibility,
    pub lambda_min: f64,
    /// Weight of the interior point mixed in by the PSD repair.
    pub repair_weight: f64,
    pub final_penalty: f64,
    pub dense_projections: u64,
    pub lanczos_projections: u64,
}

pub fn feasibility(x: &Matrix, k: usize) -> Result<Feasibility> {
    let m = x.rows();
    let c = m as f64 / k as f64;
    let diag = (0..m).map(|i| (x[(i, i)] - 1.0).abs()).fold(0.0, f64::max);
    let nonneg = x.as_slice().iter().fold(0.0f64, |acc, &v| if -v > acc { -v } else { acc });
    let rowsum = x.row_sums().iter().map(|s| (s - c).abs() / c).fold(0.0, f64::max);
    let psd = (-lambda_min(x)?).max(0.0);
    Ok(Feasibility { diag, nonneg, rowsum, psd })
}

/// Subtracts row and column means: `P Y P` with `P = I - J/m`.
fn double_center(y: &mut Matrix) {
    let m = y.rows();
    let row_means: Vec<f64> = y.row_sums().iter().map(|s| s / m as f64).collect();
    let grand = row_means.iter().sum::<f64>() / m as f64;
    for i in 0..m {
        let ri = row_means[i];
        for (j, v) in y.row_mut(i).iter_mut().enumerate() {
            *v += grand - ri - row_means[j];
        }
    }
    y.symmetrize();
}

/// Cost matrix with the same optimisers as `k` on the feasible set:
/// diagonal removed, doubly centred and scaled to Frobenius norm `m`.
fn reduced_cost(k: &Matrix) -> Matrix {
    let m = k.rows();
    let mut c = k.clone();
    c.symmetrize();
    for i in 0..m {
        c[(i, i)] = 0.0;
    }
    double_center(&mut c);
    for i in 0..m {
        c[(i, i)] = 0.0;
    }
    let f = c.frobenius_norm();
    if f > 0.0 {
        c.scale(m as f64 / f);
    }
    c
}

fn interior_point(m: usize, k: usize) -> (Matrix, f64) {
    let c = m as f64 / k as f64;
    let a = if m > 1 { (c - 1.0) / (m as f64 - 1.0) } else { 0.0 };
    (Matrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { a }), a)
}

/// Solves the relaxation for the kernel matrix `k_mat` and `k` clusters.
/// Non-convergence is not an error; inspect `converged`.
pub fn solve_sdp(k_mat: &Matrix, k: usize, opts: &SdpOptions) -> Result<SdpSolution> {
    if !k_mat.is_square() {
        return Err(Error::input("kernel matrix must be square"));
    }
    let m = k_mat.rows();
    if k == 0 || m == 0 || m % k != 0 {
        return Err(Error::param(format!("k = {k} does not divide m = {m}")));
    }
    if !(opts.tol > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation < 2.0) || !(opts.penalty > 0.0) {
        return Err(Error::param("tol and penalty must be positive and relaxation in (0, 2)"));
    }
    if k == m || k == 1 {
        // the feasible set is a single point
        let x = if k == m { Matrix::identity(m) } else { Matrix::filled(m, m, 1.0) };
        return finish(k_mat, k, x, 0.0, 0.0, 0, true, opts.penalty, 0.0, (0, 0));
    }

    let c = m as f64 / k as f64;
    let cost = reduced_cost(k_mat);
    let (interior, a_int) = interior_point(m, k);
    let mut z = interior.clone();
    let mut u = Matrix::zeros(m, m);
    let mut x = Matrix::zeros(m, m);
    let mut y = Matrix::zeros(m, m);
    let mut r = opts.penalty;
    let mut proj = PsdProjector::new();
    proj.rel_tol = 1e-2 * opts.tol;
    let relax = opts.relaxation;
    let shift = c / m as f64;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=opts.max_iter {
        iterations = it;
        // X = Proj_C1(Z - U + cost / r)
        {
            let (ys, zs, us, cs) = (y.as_mut_slice(), z.as_slice(), u.as_slice(), cost.as_slice());
            let inv = 1.0 / r;
            for idx in 0..ys.len() {
                ys[idx] = zs[idx] - us[idx] + cs[idx] * inv;
            }
        }
        double_center(&mut y);
        let (w, _rank) = proj.project(&y, true)?;
        for (xv, wv) in x.as_mut_slice().iter_mut().zip(w.as_slice()) {
            *xv = wv + shift;
        }

        // relaxed point, Z = Proj_C2(Xr + U), U += Xr - Z
        let mut dz2 = 0.0;
        let mut pr2 = 0.0;
        let mut z2 = 0.0;
        {
            let (xs, zs, us) = (x.as_slice(), z.as_mut_slice(), u.as_mut_slice());
            for idx in 0..xs.len() {
                let xr = relax * xs[idx] + (1.0 - relax) * zs[idx];
                let i = idx / m;
                let j = idx % m;
                let v = xr + us[idx];
                let zn = if i == j { 1.0 } else { v.max(0.0) };
                let d = zn - zs[idx];
                dz2 += d * d;
                us[idx] = v - zn;
                zs[idx] = zn;
                let pd = xs[idx] - zn;
                pr2 += pd * pd;
                z2 += zn * zn;
            }
        }
        let zn = libm::sqrt(z2);
        primal = libm::sqrt(pr2) / (1.0 + zn);
        dual = r * libm::sqrt(dz2) / (1.0 + zn);
        if primal < opts.tol && dual < opts.tol && opts.feas_tol.is_none_or(|f| libm::sqrt(pr2) <= f) {
            converged = true;
            break;
        }
        if opts.adapt_every > 0 && it % opts.adapt_every == 0 {
            if primal > 5.0 * dual {
                r *= 2.0;
                u.scale(0.5);
            } else if dual > 5.0 * primal {
                r *= 0.5;
                u.scale(2.0);
            }
        }
    }

    // Z is exactly diag/nonneg feasible; mix in the interior point to
    // remove any residual negative eigenvalue.
    let mut weight = 0.0;
    if opts.repair {
        let lmin = lambda_min(&z)?;
        let floor = 1.0 - a_int;
        if lmin < 0.0 {
            weight = ((-lmin) / (floor - lmin)).min(1.0);
            for (zv, iv) in z.as_mut_slice().iter_mut().zip(interior.as_slice()) {
                *zv = (1.0 - weight) * *zv + weight * iv;
            }
        }
    }
    finish(k_mat, k, z, primal, dual, iterations, converged, r, weight, (proj.dense_calls, proj.lanczos_calls))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    k_mat: &Matrix,
    k: usize,
    x_hat: Matrix,
    primal: f64,
    dual: f64,
    iterations: usize,
    converged: bool,
    penalty: f64,
    repair_weight: f64,
    calls: (u64, u64),
) -> Result<SdpSolution> {
    let feas = feasibility(&x_hat, k)?;
    Ok(SdpSolution {
        objective: k_mat.frobenius_dot(&x_hat),
        lambda_min: -feas.psd,
        feasibility: feas,
        x_hat,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        repair_weight,
        final_penalty: penalty,
        dense_projections: calls.0,
        lanczos_projections: calls.1,
    })
}
