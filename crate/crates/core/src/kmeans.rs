//! Maximising the kernel k-means objective over balanced partitions.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assign::balanced_assign;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::kernel_objective;
use crate::model::Partition;
use crate::rng;

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 14;
pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Exhaustive,
    LloydBalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best_partition: Partition,
    pub best_objective: f64,
    /// Lloyd iterations of the winning restart; enumerated partitions for
    /// the exhaustive search.
    pub iterations: usize,
    pub restarts_used: usize,
    pub method: SolveMethod,
    /// Objective after each Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn check_square(k_mat: &Matrix, k: usize) -> Result<usize> {
    if !k_mat.is_square() {
        return Err(Error::input("kernel matrix must be square"));
    }
    let m = k_mat.rows();
    if k == 0 || m == 0 || m % k != 0 {
        return Err(Error::param(alloc::format!("k = {k} does not divide m = {m}")));
    }
    Ok(m)
}

/// Global maximiser by enumerating balanced partitions modulo relabelling
/// (restricted growth strings). Ties keep the lexicographically smallest
/// label vector.
pub fn exhaustive_balanced(k_mat: &Matrix, k: usize) -> Result<SolveReport> {
    exhaustive_balanced_capped(k_mat, k, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn exhaustive_balanced_capped(k_mat: &Matrix, k: usize, cap: usize) -> Result<SolveReport> {
    let m = check_square(k_mat, k)?;
    if m > cap {
        return Err(Error::TooLarge { size: m, cap });
    }
    let mut search = Search {
        kmat: k_mat,
        k,
        size: m / k,
        labels: vec![0; m],
        members: vec![Vec::new(); k],
        best: f64::NEG_INFINITY,
        best_labels: Vec::new(),
        leaves: 0,
    };
    search.descend(0, 0, 0.0);
    let best_partition = Partition::new_unchecked(search.best_labels, k);
    Ok(SolveReport {
        best_objective: kernel_objective(k_mat, &best_partition),
        best_partition,
        iterations: search.leaves,
        restarts_used: 1,
        method: SolveMethod::Exhaustive,
        trace: Vec::new(),
    })
}

struct Search<'a> {
    kmat: &'a Matrix,
    k: usize,
    size: usize,
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    best: f64,
    best_labels: Vec<usize>,
    leaves: usize,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, used: usize, value: f64) {
        if i == self.labels.len() {
            self.leaves += 1;
            if value > self.best {
                self.best = value;
                self.best_labels = self.labels.clone();
            }
            return;
        }
        // remaining points must be able to open the clusters still unused
        let open_limit = if used < self.k { used + 1 } else { self.k };
        for s in 0..open_limit {
            if self.members[s].len() == self.size {
                continue;
            }
            let row = self.kmat.row(i);
            let delta = row[i] + 2.0 * self.members[s].iter().map(|&j| row[j]).sum::<f64>();
            self.labels[i] = s;
            self.members[s].push(i);
            self.descend(i + 1, used.max(s + 1), value + delta);
            self.members[s].pop();
        }
    }
}

/// Balanced kernel Lloyd iteration with random restarts.
///
/// Each iteration computes the affinities `A(i, s) = sum_{j in s} K_ij`
/// and reassigns with capacity `m/k` per cluster. A step is kept only if
/// the objective strictly increases, so every trace is non-decreasing.
pub fn lloyd_balanced<R: Rng + ?Sized>(k_mat: &Matrix, k: usize, restarts: usize, rng: &mut R) -> Result<SolveReport> {
    lloyd_balanced_with(k_mat, k, restarts, DEFAULT_MAX_ITER, rng)
}

pub fn lloyd_balanced_with<R: Rng + ?Sized>(
    k_mat: &Matrix,
    k: usize,
    restarts: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<SolveReport> {
    let m = check_square(k_mat, k)?;
    if restarts == 0 {
        return Err(Error::param("restarts must be at least 1"));
    }
    let base: u64 = rng.random();
    let mut best: Option<(Partition, f64, Vec<f64>)> = None;
    for r in 0..restarts {
        let mut stream = rng::stream(base, &[r as u64]);
        let init = Partition::random(m, k, &mut stream)?;
        let (part, obj, trace) = lloyd_single(k_mat, init, max_iter);
        // strict comparison keeps the lowest restart index on ties
        if best.as_ref().map_or(true, |b| obj > b.1) {
            best = Some((part, obj, trace));
        }
    }
    let (best_partition, best_objective, trace) = best.expect("at least one restart");
    Ok(SolveReport {
        best_partition,
        best_objective,
        iterations: trace.len().saturating_sub(1),
        restarts_used: restarts,
        method: SolveMethod::LloydBalanced,
        trace,
    })
}

/// Runs Lloyd from a given balanced start. Returns the final partition, its
/// objective and the objective trace (starting value first).
///
/// When the batch step stalls, single exchanges `i <-> j` between clusters
/// are tried with their exact objective change; a successful exchange
/// phase hands control back to the batch step.
pub fn lloyd_single(k_mat: &Matrix, init: Partition, max_iter: usize) -> (Partition, f64, Vec<f64>) {
    let m = init.m();
    let k = init.k();
    let size = m / k;
    let mut labels = init.into_labels();
    let mut obj = kernel_objective(k_mat, &Partition::new_unchecked(labels.clone(), k));
    let mut trace = vec![obj];
    let mut aff = Matrix::zeros(m, k);
    let mut cost = Matrix::zeros(m, k);
    for _ in 0..max_iter {
        affinities(k_mat, &labels, &mut aff);
        for (c, a) in cost.as_mut_slice().iter_mut().zip(aff.as_slice()) {
            *c = -a;
        }
        let next = balanced_assign(&cost, size);
        if next != labels {
            let next_obj = kernel_objective(k_mat, &Partition::new_unchecked(next.clone(), k));
            if next_obj > obj + 1e-12 * obj.abs() {
                labels = next;
                obj = next_obj;
                trace.push(obj);
                continue;
            }
        }
        let swapped = exchange_pass(k_mat, &mut labels, &mut aff, obj);
        if swapped <= obj + 1e-12 * obj.abs() {
            break;
        }
        obj = kernel_objective(k_mat, &Partition::new_unchecked(labels.clone(), k));
        trace.push(obj);
    }
    (Partition::new_unchecked(labels, k), obj, trace)
}

fn affinities(k_mat: &Matrix, labels: &[usize], aff: &mut Matrix) {
    for i in 0..labels.len() {
        let row = k_mat.row(i);
        let a = aff.row_mut(i);
        a.fill(0.0);
        for (j, &v) in row.iter().enumerate() {
            a[labels[j]] += v;
        }
    }
}

/// Best-improvement exchanges until none gains. `aff` must hold the
/// affinities of `labels` and is kept current. Returns the new objective
/// as tracked incrementally.
fn exchange_pass(k_mat: &Matrix, labels: &mut [usize], aff: &mut Matrix, mut obj: f64) -> f64 {
    let m = labels.len();
    let limit = 4 * m * m;
    for _ in 0..limit {
        let mut best = (0.0, usize::MAX, usize::MAX);
        for i in 0..m {
            let s = labels[i];
            let ai = aff.row(i);
            let kii = k_mat[(i, i)];
            let ki = k_mat.row(i);
            for j in i + 1..m {
                let t = labels[j];
                if s == t {
                    continue;
                }
                let aj = aff.row(j);
                let gain = 2.0 * (ai[t] - ai[s] + aj[s] - aj[t]) + 2.0 * (kii + k_mat[(j, j)]) - 4.0 * ki[j];
                if gain > best.0 {
                    best = (gain, i, j);
                }
            }
        }
        let (gain, i, j) = best;
        if i == usize::MAX || gain <= 1e-12 * obj.abs() {
            break;
        }
        let (s, t) = (labels[i], labels[j]);
        labels[i] = t;
        labels[j] = s;
        for r in 0..m {
            let a = aff.row_mut(r);
            let (kri, krj) = (k_mat[(r, i)], k_mat[(r, j)]);
            a[s] += krj - kri;
            a[t] += kri - krj;
        }
        obj += gain;
    }
    obj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gram_from_points;
    use crate::metrics::{clustering_matrix, misclassification};
    use crate::model::{sample_dataset, ModelParams};

    fn all_balanced(m: usize, k: usize) -> Vec<Vec<usize>> {
        // independent enumerator: every label vector, filtered for balance
        let mut out = Vec::new();
        let total = k.pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let mut l = vec![0; m];
            for x in l.iter_mut() {
                *x = c % k;
                c /= k;
            }
            let counts = crate::metrics::label_counts(&l, k);
            if counts.iter().all(|&n| n == m / k) {
                out.push(l);
            }
        }
        out
    }

    fn random_kernel(m: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, &[]);
        let mut a = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = r.random_range(0.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    #[test]
    fn enumerates_three_partitions_of_four() {
        let rep = exhaustive_balanced(&Matrix::identity(4), 2).unwrap();
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn constant_kernel_tie_break() {
        let rep = exhaustive_balanced(&Matrix::filled(6, 6, 1.0), 2).unwrap();
        assert_eq!(rep.best_partition.labels(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(rep.best_objective, 18.0);
    }

    #[test]
    fn exhaustive_matches_independent_enumeration() {
        for (m, k, seed) in [(6, 2, 1), (6, 3, 2), (8, 2, 3), (9, 3, 4), (8, 4, 5)] {
            let kmat = random_kernel(m, seed);
            let rep = exhaustive_balanced(&kmat, k).unwrap();
            let brute = all_balanced(m, k)
                .into_iter()
                .map(|l| kernel_objective(&kmat, &Partition::new(l, k).unwrap()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((rep.best_objective - brute).abs() < 1e-10);
        }
    }

    #[test]
    fn exhaustive_refuses_large() {
        assert!(matches!(exhaustive_balanced(&Matrix::identity(16), 2), Err(Error::TooLarge { size: 16, cap: 14 })));
        assert!(exhaustive_balanced(&Matrix::identity(5), 2).is_err());
    }

    #[test]
    fn exhaustive_finds_planted_block() {
        let mut r = rng::stream(7, &[]);
        let truth = Partition::random(12, 3, &mut r).unwrap();
        let mut kmat = clustering_matrix(&truth);
        for v in kmat.as_mut_slice() {
            *v += r.random_range(-0.05..0.05);
        }
        kmat.symmetrize();
        let rep = exhaustive_balanced(&kmat, 3).unwrap();
        assert_eq!(misclassification(&rep.best_partition, &truth).unwrap(), 0.0);
        // dominates random balanced partitions
        for _ in 0..1000 {
            let s = Partition::random(12, 3, &mut r).unwrap();
            assert!(kernel_objective(&kmat, &s) <= rep.best_objective + 1e-12);
        }
    }

    #[test]
    fn lloyd_is_monotone_and_balanced() {
        for seed in 0..20 {
            let ds = sample_dataset(&ModelParams::new(3, 60, 1.0, 2.0, seed)).unwrap();
            let kmat = gram_from_points(&ds.points);
            let mut r = rng::stream(seed, &[1]);
            let rep = lloyd_balanced(&kmat, 3, 4, &mut r).unwrap();
            assert!(rep.trace.windows(2).all(|w| w[1] >= w[0]));
            assert!(Partition::new(rep.best_partition.labels().to_vec(), 3).is_ok());
            assert_eq!(rep.best_objective, kernel_objective(&kmat, &rep.best_partition));
        }
    }

    #[test]
    fn lloyd_recovers_strong_signal() {
        let mut ok = 0;
        for seed in 0..100 {
            let ds = sample_dataset(&ModelParams::new(2, 100, 1.0, 100.0, seed)).unwrap();
            let kmat = gram_from_points(&ds.points);
            let mut r = rng::stream(seed, &[2]);
            let rep = lloyd_balanced(&kmat, 2, 5, &mut r).unwrap();
            if misclassification(&rep.best_partition, &ds.truth).unwrap() == 0.0 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}");
    }

    #[test]
    fn lloyd_never_beats_exhaustive() {
        let mut equal = 0;
        for seed in 0..30 {
            let ds = sample_dataset(&ModelParams::new(2, 12, 1.0, 1.0, seed)).unwrap();
            let kmat = gram_from_points(&ds.points);
            let ex = exhaustive_balanced(&kmat, 2).unwrap();
            let mut r = rng::stream(seed, &[3]);
            let ll = lloyd_balanced(&kmat, 2, 20, &mut r).unwrap();
            assert!(ll.best_objective <= ex.best_objective + 1e-9 * ex.best_objective.abs());
            if (ll.best_objective - ex.best_objective).abs() <= 1e-9 * ex.best_objective.abs() {
                equal += 1;
            }
        }
        assert!(equal >= 24, "{equal}");
    }

    #[test]
    fn lloyd_is_deterministic() {
        let kmat = random_kernel(20, 3);
        let a = lloyd_balanced(&kmat, 2, 5, &mut rng::stream(1, &[])).unwrap();
        let b = lloyd_balanced(&kmat, 2, 5, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(a, b);
        assert!(lloyd_balanced(&kmat, 3, 5, &mut rng::stream(1, &[])).is_err());
        assert!(lloyd_balanced(&kmat, 2, 0, &mut rng::stream(1, &[])).is_err());
    }
}
