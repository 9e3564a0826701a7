//! Planted balanced Gaussian mixtures.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Instance description. `c0`, `c_gamma` and `c_sdp` are the free constants
/// inside kappa, gamma_max/min and the SDP threshold respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub rho: f64,
    pub seed: u64,
    pub c0: f64,
    pub c_gamma: f64,
    pub c_sdp: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { k: 2, p: 100, alpha: 1.0, rho: 1.0, seed: 0, c0: 1.0, c_gamma: 1.0, c_sdp: 1.0 }
    }
}

impl ModelParams {
    pub fn new(k: usize, p: usize, alpha: f64, rho: f64, seed: u64) -> Self {
        ModelParams { k, p, alpha, rho, seed, ..Default::default() }
    }

    /// Number of samples `round(alpha * p)`.
    pub fn m(&self) -> usize {
        libm::round(self.alpha * self.p as f64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param(format!("k must be at least 2, got {}", self.k)));
        }
        if self.p == 0 {
            return Err(Error::param("p must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::param(format!("alpha must be positive and finite, got {}", self.alpha)));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::param(format!("rho must be non-negative and finite, got {}", self.rho)));
        }
        for (name, v) in [("c0", self.c0), ("c_gamma", self.c_gamma), ("c_sdp", self.c_sdp)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let m = self.m();
        if m < self.k {
            return Err(Error::param(format!("m = {m} is smaller than k = {}", self.k)));
        }
        if m % self.k != 0 {
            return Err(Error::param(format!("m = round(alpha*p) = {m} is not divisible by k = {}", self.k)));
        }
        Ok(())
    }
}

/// A balanced assignment of `m` points to `k` labels `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Validates labels and balance.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let m = labels.len();
        if k == 0 || m % k != 0 {
            return Err(Error::param(format!("{m} points cannot be split evenly into {k} clusters")));
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::input(format!("label {l} out of range for k = {k}")));
            }
            counts[l] += 1;
        }
        let size = m / k;
        if let Some(s) = counts.iter().position(|&c| c != size) {
            return Err(Error::input(format!("cluster {s} has {} members, expected {size}", counts[s])));
        }
        Ok(Partition { labels, k })
    }

    pub(crate) fn new_unchecked(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(Partition::new(labels.clone(), k).is_ok());
        Partition { labels, k }
    }

    /// First `m/k` indices get label 0, the next `m/k` label 1, and so on.
    pub fn contiguous(m: usize, k: usize) -> Result<Self> {
        if k == 0 || m % k != 0 {
            return Err(Error::param(format!("{m} points cannot be split evenly into {k} clusters")));
        }
        let size = m / k;
        Ok(Partition { labels: (0..m).map(|i| i / size).collect(), k })
    }

    /// Uniformly random balanced partition.
    pub fn random<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::contiguous(m, k)?;
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            p.labels.swap(i, j);
        }
        Ok(p)
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_size(&self) -> usize {
        self.labels.len() / self.k
    }

    pub fn members(&self, s: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == s).map(|(i, _)| i).collect()
    }

    /// Exchanges the labels of points `i` and `j`; balance is preserved.
    pub fn swap(&mut self, i: usize, j: usize) {
        self.labels.swap(i, j);
    }

    /// Relabels so that clusters appear in order of first occurrence.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Partition { labels, k: self.k }
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Samples, points in rows, realised centres and the planted partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Matrix,
    pub centers: Matrix,
    pub truth: Partition,
    pub params: ModelParams,
}

impl Dataset {
    pub fn m(&self) -> usize {
        self.points.rows()
    }

    pub fn p(&self) -> usize {
        self.points.cols()
    }

    /// Centre of the cluster point `i` was drawn from.
    pub fn center_of(&self, i: usize) -> &[f64] {
        self.centers.row(self.truth.labels()[i])
    }

    /// Reassembles a dataset from stored parts, checking shapes.
    pub fn from_parts(points: Matrix, centers: Matrix, truth: Partition, params: ModelParams) -> Result<Self> {
        params.validate()?;
        if points.rows() != params.m() || points.cols() != params.p {
            return Err(Error::input(format!(
                "points are {}x{}, params imply {}x{}",
                points.rows(),
                points.cols(),
                params.m(),
                params.p
            )));
        }
        if centers.rows() != params.k || centers.cols() != params.p {
            return Err(Error::input("centers do not match k x p"));
        }
        if truth.m() != params.m() || truth.k() != params.k {
            return Err(Error::input("truth partition does not match m and k"));
        }
        Ok(Dataset { points, centers, truth, params })
    }
}

/// Draws `k` centres from `N(0, k/(k-1) I_p)` and subtracts their mean.
pub fn sample_centers<R: Rng + ?Sized>(k: usize, p: usize, rng: &mut R) -> Result<Matrix> {
    if k < 2 {
        return Err(Error::param(format!("k must be at least 2, got {k}")));
    }
    if p == 0 {
        return Err(Error::param("p must be at least 1"));
    }
    let sd = libm::sqrt(k as f64 / (k as f64 - 1.0));
    let mut c = Matrix::zeros(k, p);
    for v in c.as_mut_slice() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
    for j in 0..p {
        let mean = (0..k).map(|s| c[(s, j)]).sum::<f64>() / k as f64;
        for s in 0..k {
            c[(s, j)] -= mean;
        }
    }
    Ok(c)
}

/// Samples a dataset from `params`, deterministically in `params.seed`.
pub fn sample_dataset(params: &ModelParams) -> Result<Dataset> {
    params.validate()?;
    let mut rng = rng::stream(params.seed, &[0x6d6f_6465_6c]);
    let (k, p, m) = (params.k, params.p, params.m());
    let centers = sample_centers(k, p, &mut rng)?;
    let truth = Partition::contiguous(m, k)?;
    let shift = libm::sqrt(params.rho / p as f64);
    let mut points = Matrix::zeros(m, p);
    for i in 0..m {
        let mu = centers.row(truth.labels()[i]);
        let row = points.row_mut(i);
        for (x, &c) in row.iter_mut().zip(mu) {
            let z: f64 = rng.sample(StandardNormal);
            *x = shift * c + z;
        }
    }
    Ok(Dataset { points, centers, truth, params: *params })
}
