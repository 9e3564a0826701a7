//! Assignment primitives: exact square assignment (Kuhn-Munkres) and a
//! capacity-constrained greedy assignment with swap repair.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;

/// Maximum-weight perfect matching on a square weight matrix.
/// Returns `col[row]` and the total weight.
pub fn hungarian_max(w: &Matrix) -> (Vec<usize>, f64) {
    let n = w.rows();
    assert!(w.is_square());
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // shortest augmenting path with potentials, 1-based with a virtual column 0
    let cost = |i: usize, j: usize| -w[(i - 1, j - 1)];
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        col[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| w[(i, col[i])]).sum();
    (col, total)
}

/// Assigns each row of the `m x k` cost matrix to a column, each column
/// receiving exactly `capacity` rows, approximately minimising total cost.
///
/// Rows are placed greedily in order of decreasing regret (second-best
/// minus best cost, ties to the lowest index); afterwards pairwise swaps
/// between clusters are applied while any of them lowers the total.
pub fn balanced_assign(cost: &Matrix, capacity: usize) -> Vec<usize> {
    let (m, k) = (cost.rows(), cost.cols());
    assert_eq!(m, k * capacity, "capacity does not match problem size");
    let mut order: Vec<(f64, usize)> = (0..m)
        .map(|i| {
            let row = cost.row(i);
            let (mut b1, mut b2) = (f64::INFINITY, f64::INFINITY);
            for &c in row {
                if c < b1 {
                    b2 = b1;
                    b1 = c;
                } else if c < b2 {
                    b2 = c;
                }
            }
            let regret = if k == 1 { 0.0 } else { b2 - b1 };
            (regret, i)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut left = vec![capacity; k];
    let mut labels = vec![usize::MAX; m];
    for &(_, i) in &order {
        let row = cost.row(i);
        let mut best = usize::MAX;
        for s in 0..k {
            if left[s] > 0 && (best == usize::MAX || row[s] < row[best]) {
                best = s;
            }
        }
        labels[i] = best;
        left[best] -= 1;
    }
    improve_by_swaps(cost, &mut labels);
    labels
}

/// Applies the best improving pairwise swap between every pair of clusters
/// until none lowers the cost. Returns the number of swaps made.
pub(crate) fn improve_by_swaps(cost: &Matrix, labels: &mut [usize]) -> usize {
    let k = cost.cols();
    let m = labels.len();
    let mut swaps = 0;
    // guards against cycling on floating point noise
    let limit = 4 * m * m + 16;
    loop {
        let mut improved = false;
        for s in 0..k {
            for t in s + 1..k {
                // gain of moving i from s to t is cost(i,s) - cost(i,t)
                let mut best_s = (f64::NEG_INFINITY, usize::MAX);
                let mut best_t = (f64::NEG_INFINITY, usize::MAX);
                for (i, &l) in labels.iter().enumerate() {
                    if l == s {
                        let g = cost[(i, s)] - cost[(i, t)];
                        if g > best_s.0 {
                            best_s = (g, i);
                        }
                    } else if l == t {
                        let g = cost[(i, t)] - cost[(i, s)];
                        if g > best_t.0 {
                            best_t = (g, i);
                        }
                    }
                }
                if best_s.1 == usize::MAX || best_t.1 == usize::MAX {
                    continue;
                }
                let gain = best_s.0 + best_t.0;
                let scale = cost[(best_s.1, s)].abs() + cost[(best_t.1, t)].abs();
                if gain > 1e-12 * scale.max(1.0) {
                    labels[best_s.1] = t;
                    labels[best_t.1] = s;
                    swaps += 1;
                    improved = true;
                }
            }
        }
        if !improved || swaps > limit {
            return swaps;
        }
    }
}
