use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::Matrix;

/// Shortest-augmenting-path Hungarian algorithm with row/column potentials.
/// Returns `(total cost, assignment)` where `assignment[row] = column`.
fn solve(cost: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let m = rows.len();
    debug_assert_eq!(m, cols.len());
    let at = |i: usize, j: usize| cost[rows[i - 1] * n + cols[j - 1]];
    // 1-based indexing with a virtual column 0.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = at(i0, j) - u[i0] - v[j];
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
            for j in 0..=m {
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
    let mut assignment = vec![0usize; m];
    for j in 1..=m {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = (0..m).map(|i| cost[rows[i] * n + cols[assignment[i]]]).sum();
    (total, assignment)
}

/// Minimum-cost perfect assignment of a square cost matrix.
///
/// Returns `perm` with `perm[row] = column`. Among optimal assignments the
/// lexicographically smallest `perm` is returned (ties within a relative
/// `1e-12` of the optimum), which makes reports deterministic.
pub fn hungarian(cost: &Matrix) -> Vec<usize> {
    assert!(cost.is_square(), "hungarian needs a square cost matrix");
    let n = cost.rows();
    if n == 0 {
        return Vec::new();
    }
    let data = cost.data();
    let all: Vec<usize> = (0..n).collect();
    let (best, _) = solve(data, n, &all, &all);
    let tol = 1e-12 * (1.0 + best.abs() + cost.max_abs());

    let mut perm = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = all.clone();
    let mut fixed = 0.0;
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for (idx, &col) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
            let rest = if rest_rows.is_empty() { 0.0 } else { solve(data, n, &rest_rows, &rest_cols).0 };
            if fixed + cost[(row, col)] + rest <= best + tol {
                chosen = Some(idx);
                break;
            }
        }
        // The optimum is always attainable by some column; fall back to the
        // cheapest completion if rounding pushes every candidate over `tol`.
        let idx = chosen.unwrap_or_else(|| {
            let mut best_idx = 0;
            let mut best_val = f64::INFINITY;
            for (idx, &col) in free_cols.iter().enumerate() {
                let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
                let rest = if rest_rows.is_empty() { 0.0 } else { solve(data, n, &rest_rows, &rest_cols).0 };
                if cost[(row, col)] + rest < best_val {
                    best_val = cost[(row, col)] + rest;
                    best_idx = idx;
                }
            }
            best_idx
        });
        let col = free_cols.remove(idx);
        fixed += cost[(row, col)];
        perm.push(col);
    }
    perm
}

pub fn assignment_cost(cost: &Matrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}
