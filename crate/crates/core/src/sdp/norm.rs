//! The `inf -> 1` operator norm `max_{y, z in {-1, 1}^m} y^T A z`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

pub const DEFAULT_NORM_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub y: Vec<i8>,
    pub z: Vec<i8>,
    /// Whether `value` is the exact maximum.
    pub exact: bool,
}

#[inline]
fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

fn bilinear(a: &Matrix, y: &[i8], z: &[i8]) -> f64 {
    let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
    let az = a.matvec(&zf);
    az.iter().zip(y).map(|(v, &s)| v * s as f64).sum()
}

/// Exact norm by enumerating `y` (with `y_0 = +1`, by symmetry) in Gray
/// code order; for fixed `y` the best `z` is `sign(A^T y)`.
pub fn inf_to_one_norm_exact(a: &Matrix, cap: usize) -> Result<NormEstimate> {
    let (rows, cols) = (a.rows(), a.cols());
    if rows > cap {
        return Err(Error::TooLarge { size: rows, cap });
    }
    if rows == 0 || cols == 0 {
        return Ok(NormEstimate { value: 0.0, y: vec![1; rows], z: vec![1; cols], exact: true });
    }
    if rows > 62 {
        return Err(Error::param(format!("cannot enumerate 2^{rows} sign vectors")));
    }
    let mut y = vec![1i8; rows];
    // v = A^T y
    let mut v = vec![0.0; cols];
    for i in 0..rows {
        for (vj, aij) in v.iter_mut().zip(a.row(i)) {
            *vj += aij;
        }
    }
    let value_of = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    let mut best = value_of(&v);
    let mut best_y = y.clone();
    let mut best_v = v.clone();
    let steps: u64 = 1u64 << (rows - 1);
    for g in 1..steps {
        // flip coordinate 1 + trailing zeros of g, leaving y_0 fixed
        let i = 1 + g.trailing_zeros() as usize;
        let s = y[i] as f64;
        for (vj, aij) in v.iter_mut().zip(a.row(i)) {
            *vj -= 2.0 * s * aij;
        }
        y[i] = -y[i];
        let val = value_of(&v);
        if val > best {
            best = val;
            best_y.copy_from_slice(&y);
            best_v.copy_from_slice(&v);
        }
    }
    let z: Vec<i8> = best_v.iter().map(|&x| sign(x)).collect();
    // recompute from the sign vectors to remove accumulated drift
    let value = bilinear(a, &best_y, &z);
    Ok(NormEstimate { value, y: best_y, z, exact: true })
}

/// Alternating maximisation from `y0`: `z = sign(A^T y)`, `y = sign(A z)`
/// until the value stops increasing. Returns the estimate and the value
/// after every half step.
pub fn alternating_ascent(a: &Matrix, y0: &[i8]) -> (NormEstimate, Vec<f64>) {
    let mut y: Vec<i8> = y0.to_vec();
    let mut z: Vec<i8>;
    let mut trace = Vec::new();
    let mut value = f64::NEG_INFINITY;
    let limit = 16 + 4 * (a.rows() + a.cols());
    for _ in 0..limit {
        let yf: Vec<f64> = y.iter().map(|&s| s as f64).collect();
        let aty = a.tmatvec(&yf);
        z = aty.iter().map(|&x| sign(x)).collect();
        let vz: f64 = aty.iter().map(|x| x.abs()).sum();
        trace.push(vz);
        let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
        let az = a.matvec(&zf);
        let next: Vec<i8> = az.iter().map(|&x| sign(x)).collect();
        let vy: f64 = az.iter().map(|x| x.abs()).sum();
        trace.push(vy);
        let improved = vy > value * (1.0 + 1e-15) + 1e-300;
        value = vy;
        y = next;
        if !improved {
            let exact_value = bilinear(a, &y, &z);
            return (NormEstimate { value: exact_value, y, z, exact: false }, trace);
        }
    }
    let yf: Vec<f64> = y.iter().map(|&s| s as f64).collect();
    let z: Vec<i8> = a.tmatvec(&yf).iter().map(|&x| sign(x)).collect();
    let value = bilinear(a, &y, &z);
    (NormEstimate { value, y, z, exact: false }, trace)
}

/// Lower bound on the norm: best alternating ascent over `restarts`
/// random sign starts (the first start is all ones).
pub fn inf_to_one_norm_lower<R: Rng + ?Sized>(a: &Matrix, restarts: usize, rng: &mut R) -> NormEstimate {
    let rows = a.rows();
    let mut best: Option<NormEstimate> = None;
    for r in 0..restarts.max(1) {
        let y0: Vec<i8> = if r == 0 { vec![1; rows] } else { (0..rows).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect() };
        let (est, _) = alternating_ascent(a, &y0);
        if best.as_ref().map_or(true, |b| est.value > b.value) {
            best = Some(est);
        }
    }
    best.expect("at least one restart")
}

/// Value of `y^T A z` for sign vectors, exposed for checks.
pub fn sign_bilinear(a: &Matrix, y: &[i8], z: &[i8]) -> f64 {
    let yf: Vec<f64> = y.iter().map(|&s| s as f64).collect();
    let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
    dot(&yf, &a.matvec(&zf))
}
