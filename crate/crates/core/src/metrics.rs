//! Comparing partitions with each other and with a kernel matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::assign::hungarian_max;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Partition;

fn check_pair(sigma: &Partition, star: &Partition) -> Result<()> {
    if sigma.m() != star.m() {
        return Err(Error::input(format!("partitions have lengths {} and {}", sigma.m(), star.m())));
    }
    if sigma.k() != star.k() {
        return Err(Error::input(format!("partitions have {} and {} clusters", sigma.k(), star.k())));
    }
    Ok(())
}

/// `beta[s][t] = k |sigma^-1(s) & star^-1(t)| / m`.
pub fn overlap_matrix(sigma: &Partition, star: &Partition) -> Result<Matrix> {
    check_pair(sigma, star)?;
    let (m, k) = (sigma.m(), sigma.k());
    let mut beta = Matrix::zeros(k, k);
    for (&s, &t) in sigma.labels().iter().zip(star.labels()) {
        beta[(s, t)] += 1.0;
    }
    beta.scale(k as f64 / m as f64);
    Ok(beta)
}

/// `||beta||_F^2`, between 1 (independent) and k (identical up to labels).
pub fn overlap_similarity(beta: &Matrix) -> f64 {
    beta.as_slice().iter().map(|v| v * v).sum()
}

/// Fraction of misclassified points after the best relabelling,
/// `1 - max_pi trace(pi beta) / k`.
pub fn misclassification(sigma: &Partition, star: &Partition) -> Result<f64> {
    let beta = overlap_matrix(sigma, star)?;
    Ok(misclassification_from_overlap(&beta))
}

pub fn misclassification_from_overlap(beta: &Matrix) -> f64 {
    let k = beta.rows() as f64;
    let (_, best) = hungarian_max(beta);
    (1.0 - best / k).max(0.0)
}

/// `F(sigma) = sum_s sum_{i,j in s} K_ij`.
pub fn kernel_objective(k: &Matrix, sigma: &Partition) -> f64 {
    assert_eq!(k.rows(), sigma.m());
    let l = sigma.labels();
    let mut total = 0.0;
    for i in 0..k.rows() {
        let row = k.row(i);
        let li = l[i];
        let mut s = 0.0;
        for (j, &v) in row.iter().enumerate() {
            if l[j] == li {
                s += v;
            }
        }
        total += s;
    }
    total
}

/// `(k / m) F(sigma)`.
pub fn kernel_objective_normalized(k: &Matrix, sigma: &Partition) -> f64 {
    sigma.k() as f64 / sigma.m() as f64 * kernel_objective(k, sigma)
}

/// 0/1 co-membership matrix.
pub fn clustering_matrix(sigma: &Partition) -> Matrix {
    let l = sigma.labels();
    Matrix::from_fn(sigma.m(), sigma.m(), |i, j| if l[i] == l[j] { 1.0 } else { 0.0 })
}

/// Partial recovery: strictly better than chance, with the overlap at
/// least `1 + (k-1) eps` so that sampling noise at zero signal does not
/// count.
pub fn is_recovered(err: f64, beta_fro2: f64, k: usize, eps: f64) -> bool {
    let kf = k as f64;
    err < 1.0 - 1.0 / kf && beta_fro2 > 1.0 + (kf - 1.0) * eps
}

/// Per-cluster member counts of a label vector (not necessarily balanced).
pub fn label_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(l: &[usize], k: usize) -> Partition {
        Partition::new(l.to_vec(), k).unwrap()
    }

    fn brute_err(a: &Partition, b: &Partition) -> f64 {
        // enumerate all relabellings of a
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![Vec::new()];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..n {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let m = a.m();
        let best = perms(a.k())
            .iter()
            .map(|pi| a.labels().iter().zip(b.labels()).filter(|(&x, &y)| pi[x] == y).count())
            .max()
            .unwrap();
        1.0 - best as f64 / m as f64
    }

    #[test]
    fn overlap_examples() {
        let star = part(&[0, 0, 1, 1], 2);
        let beta = overlap_matrix(&star, &star).unwrap();
        assert_eq!(beta, Matrix::identity(2));
        assert_eq!(overlap_similarity(&beta), 2.0);
        let alt = part(&[0, 1, 0, 1], 2);
        let beta = overlap_matrix(&alt, &star).unwrap();
        assert_eq!(beta, Matrix::filled(2, 2, 0.5));
        assert_eq!(overlap_similarity(&beta), 1.0);
        assert_eq!(misclassification(&alt, &star).unwrap(), 0.5);
        assert_eq!(misclassification(&part(&[1, 1, 0, 0], 2), &star).unwrap(), 0.0);
        assert!(overlap_matrix(&part(&[0, 1], 2), &star).is_err());
    }

    #[test]
    fn objective_examples() {
        let s = part(&[0, 1, 0, 1, 1, 0, 0, 1], 2);
        assert_eq!(kernel_objective(&Matrix::identity(8), &s), 8.0);
        assert_eq!(kernel_objective(&Matrix::filled(8, 8, 1.0), &s), 32.0);
        assert_eq!(kernel_objective_normalized(&Matrix::filled(8, 8, 1.0), &s), 8.0);

        let mut r = crate::rng::stream(5, &[]);
        use rand::Rng;
        let k = Matrix::from_fn(8, 8, |_, _| r.random_range(-1.0..1.0));
        let mut naive = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                if s.labels()[i] == s.labels()[j] {
                    naive += k[(i, j)];
                }
            }
        }
        assert!((kernel_objective(&k, &s) - naive).abs() < 1e-12);
        let x = clustering_matrix(&s);
        assert!((k.frobenius_dot(&x) - naive).abs() < 1e-12);
    }

    #[test]
    fn clustering_matrix_blocks() {
        let x = clustering_matrix(&part(&[0, 0, 1, 1], 2));
        let want = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(x, want);
    }

    #[test]
    fn recovery_rule() {
        assert!(!is_recovered(0.5, 1.0, 2, 0.05));
        assert!(!is_recovered(0.49, 1.0004, 2, 0.05));
        assert!(is_recovered(0.2, 1.36, 2, 0.05));
        assert!(is_recovered(0.49, 1.0004, 2, 0.0));
    }

    fn balanced_strategy() -> impl Strategy<Value = (Partition, Partition)> {
        (2usize..6, 1usize..6, any::<u64>()).prop_map(|(k, size, seed)| {
            let mut r = crate::rng::stream(seed, &[]);
            let a = Partition::random(k * size, k, &mut r).unwrap();
            let b = Partition::random(k * size, k, &mut r).unwrap();
            (a, b)
        })
    }

    proptest! {
        #[test]
        fn overlap_invariants((a, b) in balanced_strategy()) {
            let k = a.k();
            let beta = overlap_matrix(&a, &b).unwrap();
            let total: f64 = beta.as_slice().iter().sum();
            prop_assert!((total - k as f64).abs() < 1e-12);
            for s in 0..k {
                let row: f64 = beta.row(s).iter().sum();
                let col: f64 = (0..k).map(|t| beta[(t, s)]).sum();
                prop_assert!((row - 1.0).abs() < 1e-12 && (col - 1.0).abs() < 1e-12);
            }
            let f = overlap_similarity(&beta);
            prop_assert!(f >= 1.0 - 1e-12 && f <= k as f64 + 1e-12);
        }

        #[test]
        fn err_matches_brute_force_and_is_symmetric((a, b) in balanced_strategy()) {
            let k = a.k() as f64;
            let e = misclassification(&a, &b).unwrap();
            prop_assert!((e - brute_err(&a, &b)).abs() < 1e-12);
            prop_assert!((e - misclassification(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(e >= 0.0 && e <= 1.0 - 1.0 / k + 1e-12);
            let zero = e < 1e-12;
            let full = (overlap_similarity(&overlap_matrix(&a, &b).unwrap()) - k).abs() < 1e-9;
            let same_x = clustering_matrix(&a) == clustering_matrix(&b);
            prop_assert_eq!(zero, full);
            prop_assert_eq!(zero, same_x);
        }

        #[test]
        fn objective_is_label_invariant((a, _) in balanced_strategy(), seed in any::<u64>()) {
            use rand::Rng;
            let m = a.m();
            let mut r = crate::rng::stream(seed, &[]);
            let k = Matrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0));
            let shift: Vec<usize> = a.labels().iter().map(|&l| (l + 1) % a.k()).collect();
            let b = Partition::new(shift, a.k()).unwrap();
            prop_assert!((kernel_objective(&k, &a) - kernel_objective(&k, &b)).abs() < 1e-9);
            prop_assert_eq!(clustering_matrix(&a).l1_norm(), (m * m / a.k()) as f64);
        }
    }
}
