//! Exponential dot-product kernel `exp(<x, y> / p)`, its population
//! surrogate and the residual matrices of the first and second order
//! expansion.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix};
use crate::model::Dataset;

/// Gram matrix together with the scalar constants of the expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub k: Matrix,
    pub tau: f64,
    pub kappa: f64,
    pub gamma_max: f64,
    pub gamma_min: f64,
}

/// Raw inner products `<x_i, x_j>` of the rows of `points`.
pub fn inner_products(points: &Matrix) -> Matrix {
    points.gram_rows()
}

/// `K_ij = exp(<x_i, x_j> / p)` for the rows of `points`.
pub fn gram_from_points(points: &Matrix) -> Matrix {
    let p = points.cols() as f64;
    inner_products(points).map(|g| libm::exp(g / p))
}

pub fn gram_matrix(ds: &Dataset) -> KernelMatrix {
    let tau = tau_estimate(ds);
    let (gamma_max, gamma_min) = gammas(ds.p(), ds.params.c_gamma);
    KernelMatrix {
        k: gram_from_points(&ds.points),
        tau,
        kappa: kappa(tau, ds.p(), ds.params.c0),
        gamma_max,
        gamma_min,
    }
}

fn center_norms(ds: &Dataset) -> Vec<f64> {
    (0..ds.centers.rows()).map(|s| dot(ds.centers.row(s), ds.centers.row(s))).collect()
}

/// `tau = 1 + (rho / p^2) * mean_s ||mu_s||^2`.
pub fn tau_estimate(ds: &Dataset) -> f64 {
    let p = ds.p() as f64;
    let norms = center_norms(ds);
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    1.0 + ds.params.rho * mean / (p * p)
}

/// `kappa = e^tau * exp(c0 ln p / sqrt p)`.
pub fn kappa(tau: f64, p: usize, c0: f64) -> f64 {
    let p = p as f64;
    libm::exp(tau) * libm::exp(c0 * libm::log(p) / libm::sqrt(p))
}

/// `(gamma_max, gamma_min) = exp(+-c ln p / sqrt p)`.
pub fn gammas(p: usize, c: f64) -> (f64, f64) {
    let p = p as f64;
    let e = c * libm::log(p) / libm::sqrt(p);
    (libm::exp(e), libm::exp(-e))
}

/// Population surrogate built from the realised centres.
pub fn surrogate_matrix(ds: &Dataset) -> Matrix {
    let (m, k) = (ds.m(), ds.params.k);
    let p = ds.p() as f64;
    let rho = ds.params.rho;
    let kap = kappa(tau_estimate(ds), ds.p(), ds.params.c0);
    let mu = ds.centers.gram_rows();
    // surrogate entries only depend on the cluster pair
    let mut off = Matrix::zeros(k, k);
    let mut diag = Vec::with_capacity(k);
    for s in 0..k {
        for t in 0..k {
            let g = mu[(s, t)];
            off[(s, t)] = 1.0 + rho * g / (p * p) + kap * rho * rho * g * g / (p * p * p * p) + kap / p;
        }
        let a = p * p + rho * mu[(s, s)];
        diag.push(1.0 + a / (p * p) + kap * a * a / (p * p * p * p) + kap / p);
    }
    let l = ds.truth.labels();
    Matrix::from_fn(m, m, |i, j| if i == j { diag[l[i]] } else { off[(l[i], l[j])] })
}

/// First and second order residual matrices.
pub fn residual_matrices(ds: &Dataset) -> (Matrix, Matrix) {
    let m = ds.m();
    let p = ds.p() as f64;
    let rho = ds.params.rho;
    let g = inner_products(&ds.points);
    let mu = ds.centers.gram_rows();
    let l = ds.truth.labels();
    let mut r1 = Matrix::zeros(m, m);
    let mut r2 = Matrix::zeros(m, m);
    let (p2, p4) = (p * p, p * p * p * p);
    for i in 0..m {
        for j in 0..m {
            let gij = g[(i, j)];
            let mij = mu[(l[i], l[j])];
            if i == j {
                let a = p2 + rho * mij;
                r1[(i, j)] = gij / p - a / p2;
                r2[(i, j)] = gij * gij / p2 - a * a / p4 - 1.0 / p;
            } else {
                r1[(i, j)] = gij / p - rho * mij / p2;
                r2[(i, j)] = gij * gij / p2 - rho * rho * mij * mij / p4 - 1.0 / p;
            }
        }
    }
    (r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_dataset, ModelParams, Partition};

    fn tiny(points: Vec<Vec<f64>>, rho: f64) -> Dataset {
        let m = points.len();
        let p = points[0].len();
        let params = ModelParams { alpha: m as f64 / p as f64, ..ModelParams::new(2, p, 1.0, rho, 0) };
        Dataset {
            points: Matrix::from_rows(&points).unwrap(),
            centers: Matrix::from_rows(&[alloc::vec![1.0; p], alloc::vec![-1.0; p]]).unwrap(),
            truth: Partition::contiguous(m, 2).unwrap(),
            params,
        }
    }

    #[test]
    fn gram_spot_values() {
        let ds = tiny(alloc::vec![alloc::vec![2.0, 0.0], alloc::vec![3.0, 0.0]], 0.0);
        let km = gram_matrix(&ds);
        assert!((km.k[(0, 1)] - libm::exp(3.0)).abs() < 1e-12);
        assert!((km.k[(0, 1)] - 20.0855).abs() < 1e-4);
        let ds = tiny(alloc::vec![alloc::vec![1.0, 1.0], alloc::vec![1.0, -1.0]], 0.0);
        let km = gram_matrix(&ds);
        assert_eq!(km.k[(0, 1)], 1.0);
        assert!((km.k[(0, 0)] - core::f64::consts::E).abs() < 1e-15);
        assert_eq!(km.tau, 1.0);
        assert!((km.gamma_max * km.gamma_min - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tau_closed_form() {
        // rho = 10, p = 100, ||mu||^2 = p
        let mut ds = sample_dataset(&ModelParams::new(2, 100, 1.0, 10.0, 1)).unwrap();
        ds.centers = Matrix::from_fn(2, 100, |s, _| if s == 0 { 1.0 } else { -1.0 });
        assert!((tau_estimate(&ds) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn tau_tracks_empirical_norms() {
        let mut hits = 0;
        for seed in 0..200 {
            let ds = sample_dataset(&ModelParams::new(2, 100, 1.0, 4.0, seed)).unwrap();
            let (m, p) = (ds.m() as f64, ds.p() as f64);
            let emp = (0..ds.m()).map(|i| dot(ds.points.row(i), ds.points.row(i))).sum::<f64>() / (m * p);
            if (tau_estimate(&ds) - emp).abs() <= 4.0 / libm::sqrt(m * p) {
                hits += 1;
            }
        }
        assert!(hits >= 190, "{hits}");
    }

    #[test]
    fn surrogate_structure() {
        let ds = sample_dataset(&ModelParams::new(2, 200, 1.0, 0.0, 2)).unwrap();
        let kt = surrogate_matrix(&ds);
        let kap = kappa(1.0, 200, 1.0);
        assert!((kt[(0, 5)] - (1.0 + kap / 200.0)).abs() < 1e-14);
        assert_eq!(kt.asymmetry(), 0.0);

        let ds = sample_dataset(&ModelParams::new(2, 400, 1.0, 5.0, 3)).unwrap();
        let kt = surrogate_matrix(&ds);
        let same = kt[(0, 1)];
        let cross = kt[(0, 399)];
        let phi = 5.0 / 400.0 * 2.0;
        assert!(same > cross);
        assert!(((same - cross) / phi - 1.0).abs() < 0.2, "{}", (same - cross) / phi);
        assert!(kt[(0, 0)] > same);
    }

    #[test]
    fn surrogate_is_a_faithful_center() {
        let p = 400;
        let mut worst_scale: f64 = 0.0;
        let mut medians = alloc::vec::Vec::new();
        for seed in 0..20 {
            let ds = sample_dataset(&ModelParams::new(2, p, 1.0, 5.0, seed)).unwrap();
            let k = gram_from_points(&ds.points);
            let kt = surrogate_matrix(&ds);
            let mut dev: alloc::vec::Vec<f64> = k.sub(&kt).as_slice().iter().map(|v| v.abs()).collect();
            dev.sort_by(f64::total_cmp);
            medians.push(dev[dev.len() / 2]);
            worst_scale = worst_scale.max(libm::log(p as f64) / libm::sqrt(p as f64));
        }
        let med = medians[medians.len() / 2];
        assert!(med <= 5.0 * worst_scale, "{med} vs {worst_scale}");
    }

    #[test]
    fn residuals_at_zero_signal() {
        let ds = sample_dataset(&ModelParams::new(2, 200, 1.0, 0.0, 9)).unwrap();
        let (r1, r2) = residual_matrices(&ds);
        let g = inner_products(&ds.points);
        let m = ds.m();
        assert!((r1[(0, 1)] - g[(0, 1)] / 200.0).abs() < 1e-14);
        let diag_mean = (0..m).map(|i| r1[(i, i)]).sum::<f64>() / m as f64;
        assert!(diag_mean.abs() <= 3.0 * libm::sqrt(2.0 / 200.0) / libm::sqrt(m as f64));
        assert_eq!(r1.asymmetry(), 0.0);
        assert!(r2.asymmetry() < 1e-12);
    }

    #[test]
    fn second_order_residual_is_centered() {
        for seed in 0..20 {
            let ds = sample_dataset(&ModelParams::new(2, 200, 1.0, 3.0, seed)).unwrap();
            let (_, r2) = residual_matrices(&ds);
            let m = ds.m();
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        s += r2[(i, j)];
                    }
                }
            }
            let mean = s / (m * (m - 1)) as f64;
            assert!(mean.abs() <= 5.0 / 200.0, "{mean}");
        }
    }

    #[test]
    fn gram_is_permutation_equivariant() {
        let ds = sample_dataset(&ModelParams::new(2, 20, 1.0, 1.0, 4)).unwrap();
        let k = gram_from_points(&ds.points);
        let perm: alloc::vec::Vec<usize> = (0..20).rev().collect();
        let shuffled = Matrix::from_fn(20, 20, |i, j| ds.points[(perm[i], j)]);
        let k2 = gram_from_points(&shuffled);
        assert_eq!(k.permuted(&perm), k2);
        assert!(k.as_slice().iter().all(|&v| v > 0.0));
    }
}
