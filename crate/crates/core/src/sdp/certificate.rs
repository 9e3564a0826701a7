//! Grothendieck-type certificate for `<K - K~, X* - X^>` and samplers of
//! the set `{X PSD, diag(X) <= 1}`.

use alloc::vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::norm::{inf_to_one_norm_exact, inf_to_one_norm_lower, NormEstimate, DEFAULT_NORM_CAP};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng;

/// Value used for the Grothendieck constant (the exact constant is unknown;
/// Krivine's bound is about 1.7822).
pub const GROTHENDIECK_CONSTANT: f64 = 1.783;

/// How the `inf -> 1` norm of `K - K~` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Exact { cap: usize },
    Heuristic { restarts: usize, seed: u64 },
    /// Exact up to `cap` rows, heuristic above.
    Auto { cap: usize, restarts: usize, seed: u64 },
}

impl Default for NormMode {
    fn default() -> Self {
        NormMode::Auto { cap: DEFAULT_NORM_CAP, restarts: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `<K - K~, X* - X^>`
    pub inner: f64,
    pub norm: NormEstimate,
    /// `inner / (K_G * norm)`
    pub ratio: f64,
    /// Set only when the norm is exact and `inner > 2 K_G norm`.
    pub violation: bool,
    /// `||X* - X^||_1`
    pub l1_gap: f64,
    /// `<K~, X* - X^>`
    pub surrogate_gap: f64,
}

impl CertificateReport {
    /// Upper bound `2 <K~, X* - X^> / phi` on `||X* - X^||_1`.
    pub fn l1_bound(&self, phi: f64) -> f64 {
        2.0 * self.surrogate_gap / phi
    }
}

/// Leading term `(rho / p) k / (k - 1)` of the curvature constant in the
/// `l1` bound.
pub fn phi_leading(rho: f64, p: usize, k: usize) -> f64 {
    rho / p as f64 * k as f64 / (k as f64 - 1.0)
}

/// Size of the neglected corrections to `phi / (rho / p)`, with unit
/// constants: `sqrt(ln p / p) + kappa rho / p`.
pub fn phi_correction_scale(rho: f64, p: usize, kappa: f64) -> f64 {
    let pf = p as f64;
    libm::sqrt(libm::log(pf.max(1.0)) / pf) + kappa * rho / pf
}

fn check_square(name: &str, a: &Matrix, m: usize) -> Result<()> {
    if a.rows() != m || a.cols() != m {
        return Err(Error::input(alloc::format!("{name} is {}x{}, expected {m}x{m}", a.rows(), a.cols())));
    }
    Ok(())
}

pub fn norm_with_mode(a: &Matrix, mode: NormMode) -> Result<NormEstimate> {
    match mode {
        NormMode::Exact { cap } => inf_to_one_norm_exact(a, cap),
        NormMode::Heuristic { restarts, seed } => {
            let mut r = rng::stream(seed, &[0x6e6f_726d]);
            Ok(inf_to_one_norm_lower(a, restarts, &mut r))
        }
        NormMode::Auto { cap, restarts, seed } => {
            if a.rows() <= cap {
                inf_to_one_norm_exact(a, cap)
            } else {
                norm_with_mode(a, NormMode::Heuristic { restarts, seed })
            }
        }
    }
}

pub fn grothendieck_certificate(
    k: &Matrix,
    ktilde: &Matrix,
    x_hat: &Matrix,
    x_star: &Matrix,
    mode: NormMode,
) -> Result<CertificateReport> {
    let m = k.rows();
    check_square("K", k, m)?;
    check_square("K~", ktilde, m)?;
    check_square("X^", x_hat, m)?;
    check_square("X*", x_star, m)?;
    let diff = k.sub(ktilde);
    let gap = x_star.sub(x_hat);
    let inner = diff.frobenius_dot(&gap);
    let norm = norm_with_mode(&diff, mode)?;
    let scale = GROTHENDIECK_CONSTANT * norm.value;
    let ratio = if scale > 0.0 { inner / scale } else if inner == 0.0 { 0.0 } else { f64::INFINITY };
    let violation = norm.exact && inner > 2.0 * scale;
    Ok(CertificateReport {
        inner,
        norm,
        ratio,
        violation,
        l1_gap: gap.l1_norm(),
        surrogate_gap: ktilde.frobenius_dot(&gap),
    })
}

/// Random `X = V V^T` with `V` Gaussian of random rank, each row projected
/// onto the unit ball, so `X` is PSD with `diag(X) <= 1`.
pub fn random_feasible_psd<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Matrix {
    let r = rng.random_range(1..=m.max(1));
    // occasionally shrink rows strictly inside the ball
    let shrink = rng.random::<bool>();
    let mut v = Matrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    for i in 0..m {
        let row = v.row_mut(i);
        let n = libm::sqrt(dot(row, row));
        let target = if shrink { rng.random::<f64>() } else { 1.0 };
        if n > target && n > 0.0 {
            for x in row.iter_mut() {
                *x *= target / n;
            }
        }
    }
    v.gram_rows()
}

/// Block coordinate ascent for `max <A, V V^T>` over unit-norm rows `v_i`
/// in `R^r`: `v_i <- normalize(sum_{j != i} (A_ij + A_ji) v_j)`. Returns
/// the final Gram matrix.
pub fn elliptope_ascent<R: Rng + ?Sized>(a: &Matrix, rank: usize, sweeps: usize, rng: &mut R) -> Matrix {
    let m = a.rows();
    let r = rank.max(1);
    let mut v = Matrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    for i in 0..m {
        normalize_row(v.row_mut(i));
    }
    let mut g = vec![0.0; r];
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for i in 0..m {
            g.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..m {
                if j != i {
                    let w = a[(i, j)] + a[(j, i)];
                    for (gx, vx) in g.iter_mut().zip(v.row(j)) {
                        *gx += w * vx;
                    }
                }
            }
            if libm::sqrt(dot(&g, &g)) > 0.0 {
                normalize_row(&mut g);
                let row = v.row_mut(i);
                moved = moved.max(row.iter().zip(&g).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
                row.copy_from_slice(&g);
            }
        }
        if moved < 1e-12 {
            break;
        }
    }
    v.gram_rows()
}

fn normalize_row(x: &mut [f64]) {
    let n = libm::sqrt(dot(x, x));
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    } else if let Some(first) = x.first_mut() {
        *first = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram_from_points, surrogate_matrix};
    use crate::linalg::lambda_min;
    use crate::metrics::clustering_matrix;
    use crate::model::{sample_dataset, ModelParams};

    #[test]
    fn zero_when_kernel_equals_surrogate() {
        let ds = sample_dataset(&ModelParams::new(2, 8, 1.0, 2.0, 3)).unwrap();
        let kt = surrogate_matrix(&ds);
        let xs = clustering_matrix(&ds.truth);
        let rep = grothendieck_certificate(&kt, &kt, &Matrix::identity(8), &xs, NormMode::default()).unwrap();
        assert_eq!(rep.inner, 0.0);
        assert_eq!(rep.ratio, 0.0);
        assert!(!rep.violation);
        assert!(rep.norm.exact);
    }

    #[test]
    fn samplers_are_feasible() {
        let mut r = rng::stream(1, &[]);
        for m in [1usize, 3, 9, 16] {
            for _ in 0..5 {
                let x = random_feasible_psd(m, &mut r);
                assert!(x.diag().iter().all(|&d| d <= 1.0 + 1e-12));
                assert!(lambda_min(&x).unwrap() >= -1e-10);
                let a = Matrix::from_fn(m, m, |_, _| r.sample::<f64, _>(StandardNormal));
                let y = elliptope_ascent(&a, m, 50, &mut r);
                assert!(y.diag().iter().all(|&d| (d - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn ascent_beats_sign_vectors_sometimes_but_not_the_constant() {
        let mut r = rng::stream(2, &[]);
        for _ in 0..20 {
            let a = Matrix::from_fn(10, 10, |_, _| r.sample::<f64, _>(StandardNormal));
            let norm = inf_to_one_norm_exact(&a, 20).unwrap().value;
            let x = elliptope_ascent(&a, 10, 200, &mut r);
            assert!(a.frobenius_dot(&x).abs() <= GROTHENDIECK_CONSTANT * norm);
        }
    }

    #[test]
    fn truth_inner_product_is_bounded() {
        for seed in 0..5 {
            let ds = sample_dataset(&ModelParams::new(2, 16, 1.0, 3.0, seed)).unwrap();
            let k = gram_from_points(&ds.points);
            let kt = surrogate_matrix(&ds);
            let xs = clustering_matrix(&ds.truth);
            let rep = grothendieck_certificate(&k, &kt, &Matrix::identity(16), &xs, NormMode::Exact { cap: 20 }).unwrap();
            assert!(!rep.violation);
            assert!(rep.ratio.abs() <= 2.0);
            assert_eq!(rep.l1_gap, 16.0 * 16.0 / 2.0 - 16.0);
        }
    }
}
