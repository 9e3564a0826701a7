//! Closed-form recovery thresholds in `rho` (natural logarithms).

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub k: usize,
    pub alpha: f64,
    pub c: f64,
    /// Kernel k-means (exponential-time) upper bound, identical to the
    /// non-kernel one: `2 sqrt(k ln k / alpha) + 2 ln k`.
    pub rho_upper_kernel_np: f64,
    /// Information-theoretic lower bound.
    pub rho_lower_np: f64,
    /// Spectral lower bound `(k - 1) / sqrt(alpha)`.
    pub rho_lower_p: f64,
    /// SDP upper bound `c k max(1, 1/sqrt(alpha))`.
    pub rho_upper_kernel_p: f64,
}

pub fn rho_upper_kernel_np(k: usize, alpha: f64) -> f64 {
    let kf = k as f64;
    let lk = libm::log(kf);
    2.0 * libm::sqrt(kf * lk / alpha) + 2.0 * lk
}

pub fn rho_lower_np(k: usize, alpha: f64) -> f64 {
    if k == 2 {
        libm::sqrt(1.0 / alpha)
    } else {
        let k1 = k as f64 - 1.0;
        libm::sqrt(2.0 * k1 * libm::log(k1) / alpha)
    }
}

pub fn rho_lower_p(k: usize, alpha: f64) -> f64 {
    (k as f64 - 1.0) / libm::sqrt(alpha)
}

pub fn rho_upper_kernel_p(k: usize, alpha: f64, c: f64) -> f64 {
    c * k as f64 * (1.0f64).max(1.0 / libm::sqrt(alpha))
}

pub fn thresholds(k: usize, alpha: f64, c: f64) -> Result<ThresholdSet> {
    if k < 2 {
        return Err(Error::param(format!("k = {k} must be at least 2")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha = {alpha} must be positive and finite")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("c = {c} must be positive and finite")));
    }
    Ok(ThresholdSet {
        k,
        alpha,
        c,
        rho_upper_kernel_np: rho_upper_kernel_np(k, alpha),
        rho_lower_np: rho_lower_np(k, alpha),
        rho_lower_p: rho_lower_p(k, alpha),
        rho_upper_kernel_p: rho_upper_kernel_p(k, alpha, c),
    })
}
