//! Rounding an SDP solution to a balanced partition by `l1` k-medians on
//! its rows, and the misclassification certificate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{balanced_assign, hungarian_max};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{clustering_matrix, misclassification};
use crate::model::Partition;

/// Approximation factor assumed for the k-medians step.
pub const DEFAULT_ETA: f64 = 7.0;
/// Largest `m` for the exhaustive k-medians oracle.
pub const EXACT_KMEDIANS_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMediansSolution {
    /// Row indices used as centres, ascending.
    pub medoids: Vec<usize>,
    /// Nearest medoid (as an index into `medoids`) for every row.
    pub labels: Vec<usize>,
    pub cost: f64,
    pub swaps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub partition: Partition,
    pub eta: f64,
    /// `||X^ - X*||_1`
    pub l1_gap: f64,
    /// `2 (1 + 2 eta) l1_gap / ||X*||_1`
    pub certified_err_bound: f64,
    /// Whether the certified bound is below `1 - 1/k`.
    pub certified_recovery: bool,
    pub actual_err: f64,
    /// Misclassification of the raw (possibly unbalanced) k-medians labels.
    pub unbalanced_err: f64,
    pub kmedians_cost: f64,
}

/// Pairwise `l1` distances between the rows of `x`.
pub fn row_l1_distances(x: &Matrix) -> Matrix {
    let m = x.rows();
    let mut d = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).abs()).sum();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn assign_to(d: &Matrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let m = d.rows();
    let mut labels = vec![0; m];
    let mut cost = 0.0;
    for i in 0..m {
        let mut best = (f64::INFINITY, 0);
        for (s, &c) in medoids.iter().enumerate() {
            let v = d[(i, c)];
            if v < best.0 {
                best = (v, s);
            }
        }
        labels[i] = best.1;
        cost += best.0;
    }
    (labels, cost)
}

/// Single-swap local search for discrete k-medians over the distance
/// matrix `d`, seeded by distance-weighted sampling.
pub fn kmedians_local_search<R: Rng + ?Sized>(d: &Matrix, k: usize, rng: &mut R) -> Result<KMediansSolution> {
    let m = d.rows();
    if k == 0 || k > m {
        return Err(Error::param(format!("k = {k} must lie in 1..={m}")));
    }
    // seeding
    let mut medoids = vec![rng.random_range(0..m)];
    let mut near: Vec<f64> = (0..m).map(|i| d[(i, medoids[0])]).collect();
    while medoids.len() < k {
        let total: f64 = near.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in near.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            (0..m).find(|i| !medoids.contains(i)).expect("k <= m")
        };
        medoids.push(pick);
        for i in 0..m {
            near[i] = near[i].min(d[(i, pick)]);
        }
    }

    let (_, mut cost) = assign_to(d, &medoids);
    let mut swaps = 0;
    loop {
        // nearest and second nearest medoid distances
        let mut d1 = vec![f64::INFINITY; m];
        let mut d2 = vec![f64::INFINITY; m];
        let mut n1 = vec![0usize; m];
        for i in 0..m {
            for (s, &c) in medoids.iter().enumerate() {
                let v = d[(i, c)];
                if v < d1[i] {
                    d2[i] = d1[i];
                    d1[i] = v;
                    n1[i] = s;
                } else if v < d2[i] {
                    d2[i] = v;
                }
            }
        }
        let mut best = (0.0, usize::MAX, usize::MAX);
        for cand in 0..m {
            if medoids.contains(&cand) {
                continue;
            }
            for s in 0..k {
                let mut delta = 0.0;
                for i in 0..m {
                    let dc = d[(i, cand)];
                    let keep = if n1[i] == s { d2[i] } else { d1[i] };
                    delta += keep.min(dc) - d1[i];
                }
                if delta < best.0 {
                    best = (delta, s, cand);
                }
            }
        }
        if best.1 == usize::MAX || best.0 >= -1e-12 * cost.max(1.0) {
            break;
        }
        medoids[best.1] = best.2;
        cost += best.0;
        swaps += 1;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&s| medoids[s]);
    let medoids: Vec<usize> = order.iter().map(|&s| medoids[s]).collect();
    let (labels, cost) = assign_to(d, &medoids);
    Ok(KMediansSolution { medoids, labels, cost, swaps })
}

/// Optimal discrete k-medians cost by enumerating all centre subsets.
pub fn kmedians_exact(d: &Matrix, k: usize) -> Result<KMediansSolution> {
    let m = d.rows();
    if m > EXACT_KMEDIANS_CAP {
        return Err(Error::TooLarge { size: m, cap: EXACT_KMEDIANS_CAP });
    }
    if k == 0 || k > m {
        return Err(Error::param(format!("k = {k} must lie in 1..={m}")));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<KMediansSolution> = None;
    loop {
        let (labels, cost) = assign_to(d, &idx);
        if best.as_ref().map_or(true, |b| cost < b.cost) {
            best = Some(KMediansSolution { medoids: idx.clone(), labels, cost, swaps: 0 });
        }
        // next k-combination in lexicographic order
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Misclassification rate between arbitrary (possibly unbalanced) label
/// vectors: one minus the best label matching, as a fraction of `m`.
pub fn unbalanced_misclassification(labels: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::input(format!("label lengths differ: {} vs {}", labels.len(), truth.len())));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut w = Matrix::zeros(k, k);
    for (&a, &b) in labels.iter().zip(truth) {
        if a >= k || b >= k {
            return Err(Error::input(format!("label out of range for k = {k}")));
        }
        w[(a, b)] += 1.0;
    }
    let (_, total) = hungarian_max(&w);
    Ok(1.0 - total / labels.len() as f64)
}

/// k-medians on the rows of `x_hat` under `l1`, then balanced reassignment
/// to the medoids with capacity `m/k`.
pub fn kmedians_rows<R: Rng + ?Sized>(x_hat: &Matrix, k: usize, rng: &mut R) -> Result<Partition> {
    Ok(kmedians_rows_detailed(x_hat, k, rng)?.0)
}

fn kmedians_rows_detailed<R: Rng + ?Sized>(x_hat: &Matrix, k: usize, rng: &mut R) -> Result<(Partition, KMediansSolution)> {
    let m = x_hat.rows();
    if !x_hat.is_square() {
        return Err(Error::input("X^ must be square"));
    }
    if k == 0 || m % k != 0 {
        return Err(Error::param(format!("k = {k} does not divide m = {m}")));
    }
    let d = row_l1_distances(x_hat);
    let sol = kmedians_local_search(&d, k, rng)?;
    let cost = Matrix::from_fn(m, k, |i, s| d[(i, sol.medoids[s])]);
    let labels = balanced_assign(&cost, m / k);
    Ok((Partition::new(labels, k)?, sol))
}

/// `2 (1 + 2 eta) ||X^ - X*||_1 / ||X*||_1`
pub fn error_certificate(x_hat: &Matrix, x_star: &Matrix, eta: f64) -> Result<f64> {
    if x_hat.rows() != x_star.rows() || x_hat.cols() != x_star.cols() {
        return Err(Error::input("X^ and X* differ in shape"));
    }
    if !(eta >= 1.0) {
        return Err(Error::param(format!("eta = {eta} must be at least 1")));
    }
    let norm = x_star.l1_norm();
    if norm <= 0.0 {
        return Err(Error::input("X* has zero l1 norm"));
    }
    Ok(2.0 * (1.0 + 2.0 * eta) * x_hat.sub(x_star).l1_norm() / norm)
}

/// Rounds `x_hat`, compares with `truth` and fills in the certificate.
pub fn round_and_certify<R: Rng + ?Sized>(x_hat: &Matrix, truth: &Partition, eta: f64, rng: &mut R) -> Result<RoundingReport> {
    let k = truth.k();
    let x_star = clustering_matrix(truth);
    let certified_err_bound = error_certificate(x_hat, &x_star, eta)?;
    let (partition, sol) = kmedians_rows_detailed(x_hat, k, rng)?;
    let actual_err = misclassification(&partition, truth)?;
    let unbalanced_err = unbalanced_misclassification(&sol.labels, truth.labels(), k)?;
    Ok(RoundingReport {
        partition,
        eta,
        l1_gap: x_hat.sub(&x_star).l1_norm(),
        certified_err_bound,
        certified_recovery: certified_err_bound < 1.0 - 1.0 / k as f64,
        actual_err,
        unbalanced_err,
        kmedians_cost: sol.cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn flipped(x: &Matrix, frac: f64, r: &mut impl Rng) -> Matrix {
        let m = x.rows();
        let mut y = x.clone();
        for i in 0..m {
            for j in i + 1..m {
                if r.random::<f64>() < frac {
                    let v = 1.0 - y[(i, j)];
                    y[(i, j)] = v;
                    y[(j, i)] = v;
                }
            }
        }
        y
    }

    #[test]
    fn certificate_spot_values() {
        let truth = Partition::contiguous(8, 2).unwrap();
        let xs = clustering_matrix(&truth);
        assert_eq!(xs.l1_norm(), 32.0);
        assert_eq!(error_certificate(&xs, &xs, 7.0).unwrap(), 0.0);
        let off = xs.add(&Matrix::filled(8, 8, 1.0 / 64.0));
        // l1 gap 1, prefactor 30, denominator 32
        assert!((error_certificate(&off, &xs, 7.0).unwrap() - 30.0 / 32.0).abs() < 1e-12);
        assert!(error_certificate(&xs, &xs, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_partition_matrix(m_over_k in 1usize..6, k in 2usize..5, seed in any::<u64>()) {
            let m = m_over_k * k;
            let mut r = rng::stream(seed, &[]);
            let truth = Partition::random(m, k, &mut r).unwrap();
            let xs = clustering_matrix(&truth);
            let rep = round_and_certify(&xs, &truth, DEFAULT_ETA, &mut r).unwrap();
            prop_assert_eq!(rep.actual_err, 0.0);
            prop_assert_eq!(rep.certified_err_bound, 0.0);
            prop_assert!(rep.certified_recovery);
        }

        #[test]
        fn output_is_balanced(m_over_k in 1usize..8, k in 2usize..4, seed in any::<u64>()) {
            let m = m_over_k * k;
            let mut r = rng::stream(seed, &[]);
            let x = Matrix::from_fn(m, m, |_, _| r.random::<f64>());
            let part = kmedians_rows(&x, k, &mut r).unwrap();
            prop_assert!(crate::metrics::label_counts(part.labels(), k).iter().all(|&c| c == m / k));
        }

        #[test]
        fn bound_is_monotone_in_gap(a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let truth = Partition::contiguous(6, 2).unwrap();
            let xs = clustering_matrix(&truth);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let xa = xs.add(&Matrix::filled(6, 6, lo));
            let xb = xs.add(&Matrix::filled(6, 6, hi));
            prop_assert!(error_certificate(&xa, &xs, 7.0).unwrap() <= error_certificate(&xb, &xs, 7.0).unwrap());
        }
    }

    #[test]
    fn robust_to_flipped_entries() {
        let truth = Partition::contiguous(40, 2).unwrap();
        let xs = clustering_matrix(&truth);
        let mut good = 0;
        for t in 0..100 {
            let mut r = rng::stream(7, &[t]);
            let y = flipped(&xs, 0.05, &mut r);
            let part = kmedians_rows(&y, 2, &mut r).unwrap();
            if misclassification(&part, &truth).unwrap() <= 0.15 {
                good += 1;
            }
        }
        assert!(good >= 95, "{good}");
    }

    fn brute_kmedians(d: &Matrix, k: usize) -> f64 {
        let m = d.rows();
        let mut best = f64::INFINITY;
        for mask in 0u32..1 << m {
            if mask.count_ones() as usize != k {
                continue;
            }
            let c: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            best = best.min((0..m).map(|i| c.iter().map(|&j| d[(i, j)]).fold(f64::INFINITY, f64::min)).sum());
        }
        best
    }

    #[test]
    fn local_search_within_factor_of_exact() {
        let mut worst = 1.0f64;
        for seed in 0..60 {
            let mut r = rng::stream(seed, &[3]);
            let m = 4 + (seed as usize % 7);
            let k = 2 + (seed as usize % 3).min(m - 2);
            let x = Matrix::from_fn(m, m, |_, _| r.random::<f64>());
            let d = row_l1_distances(&x);
            let exact = kmedians_exact(&d, k).unwrap();
            assert!((exact.cost - brute_kmedians(&d, k)).abs() < 1e-9);
            let local = kmedians_local_search(&d, k, &mut r).unwrap();
            assert!(local.cost >= exact.cost - 1e-9);
            if exact.cost > 0.0 {
                worst = worst.max(local.cost / exact.cost);
            }
        }
        assert!(worst <= DEFAULT_ETA, "{worst}");
    }

    #[test]
    fn unbalanced_err_matches_balanced_on_balanced_input() {
        let mut r = rng::stream(11, &[]);
        for _ in 0..20 {
            let a = Partition::random(12, 3, &mut r).unwrap();
            let b = Partition::random(12, 3, &mut r).unwrap();
            let u = unbalanced_misclassification(a.labels(), b.labels(), 3).unwrap();
            assert!((u - misclassification(&a, &b).unwrap()).abs() < 1e-12);
        }
    }
}
