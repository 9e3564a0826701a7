//! Recovery curves: binomial intervals, isotonic fits and the 50% crossing.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959964;

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = z * libm::sqrt(phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len(), "values and weights differ in length");
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &wt) in y.iter().zip(w) {
        blocks.push((v, wt, 1));
        while blocks.len() >= 2 {
            let n = blocks.len();
            let (m2, w2, l2) = blocks[n - 1];
            let (m1, w1, l1) = blocks[n - 2];
            if m1 <= m2 {
                break;
            }
            let wt = w1 + w2;
            let mean = if wt > 0.0 { (m1 * w1 + m2 * w2) / wt } else { (m1 + m2) / 2.0 };
            blocks.truncate(n - 2);
            blocks.push((mean, wt, l1 + l2));
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (mean, _, len) in blocks {
        out.extend(core::iter::repeat(mean).take(len));
    }
    out
}

/// Largest absolute deviation of `y` from its isotonic fit.
pub fn isotonic_residual(y: &[f64], w: &[f64]) -> f64 {
    let fit = isotonic_increasing(y, w);
    y.iter().zip(&fit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingFlag {
    Interior,
    /// Already at or above 50% at the smallest `rho`; the value is the
    /// grid minimum.
    BelowGrid,
    /// Never reaches 50%; the value is the grid maximum.
    AboveGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub rho50: f64,
    pub flag: CrossingFlag,
}

/// 50% crossing of the isotonic fit of `fractions` against increasing
/// `rhos`, by linear interpolation.
pub fn rho50(rhos: &[f64], fractions: &[f64], weights: &[f64]) -> Result<Crossing> {
    if rhos.is_empty() {
        return Err(Error::Empty("no grid points".into()));
    }
    if rhos.len() != fractions.len() || rhos.len() != weights.len() {
        return Err(Error::input("rho, fraction and weight lists differ in length"));
    }
    if rhos.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("rho grid must be strictly increasing"));
    }
    let fit = isotonic_increasing(fractions, weights);
    if fit[0] >= 0.5 {
        return Ok(Crossing { rho50: rhos[0], flag: CrossingFlag::BelowGrid });
    }
    for i in 1..fit.len() {
        if fit[i] >= 0.5 {
            let (f0, f1) = (fit[i - 1], fit[i]);
            let t = (0.5 - f0) / (f1 - f0);
            return Ok(Crossing { rho50: rhos[i - 1] + t * (rhos[i] - rhos[i - 1]), flag: CrossingFlag::Interior });
        }
    }
    Ok(Crossing { rho50: *rhos.last().expect("non-empty"), flag: CrossingFlag::AboveGrid })
}

/// One point of a recovery curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub trials: usize,
    pub recovered: usize,
    pub fraction: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub isotonic: f64,
}

/// Builds the curve from `(rho, recovered)` observations.
pub fn recovery_curve(obs: &[(f64, bool)]) -> Vec<CurvePoint> {
    let mut rhos: Vec<f64> = obs.iter().map(|o| o.0).collect();
    rhos.sort_by(|a, b| a.partial_cmp(b).expect("finite rho"));
    rhos.dedup();
    let mut pts: Vec<CurvePoint> = rhos
        .iter()
        .map(|&rho| {
            let trials = obs.iter().filter(|o| o.0 == rho).count();
            let recovered = obs.iter().filter(|o| o.0 == rho && o.1).count();
            let (lo, hi) = wilson_interval(recovered, trials, WILSON_Z);
            CurvePoint { rho, trials, recovered, fraction: recovered as f64 / trials as f64, wilson_lo: lo, wilson_hi: hi, isotonic: 0.0 }
        })
        .collect();
    let y: Vec<f64> = pts.iter().map(|p| p.fraction).collect();
    let w: Vec<f64> = pts.iter().map(|p| p.trials as f64).collect();
    for (p, f) in pts.iter_mut().zip(isotonic_increasing(&y, &w)) {
        p.isotonic = f;
    }
    pts
}

/// `rho50` of a curve built by [`recovery_curve`].
pub fn curve_rho50(curve: &[CurvePoint]) -> Result<Crossing> {
    let r: Vec<f64> = curve.iter().map(|p| p.rho).collect();
    let f: Vec<f64> = curve.iter().map(|p| p.fraction).collect();
    let w: Vec<f64> = curve.iter().map(|p| p.trials as f64).collect();
    rho50(&r, &f, &w)
}

/// Largest deviation of the curve from its isotonic fit.
pub fn curve_isotonic_residual(curve: &[CurvePoint]) -> f64 {
    curve.iter().map(|p| (p.fraction - p.isotonic).abs()).fold(0.0, f64::max)
}
