//! Brute-force enumeration over (signed) permutations. Exponential cost;
//! intended as an independent check of the assignment-based routines for
//! `d ≤ 6`.

use alloc::vec::Vec;

use crate::numerics::Matrix;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// Minimum assignment cost by enumerating all `n!` permutations.
pub fn min_assignment_cost(cost: &Matrix) -> f64 {
    permutations(cost.rows())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// `min ‖W − D·P·W0‖_F` by enumerating all `2ᵈ·d!` signed permutations.
pub fn signed_perm_distance(w: &Matrix, w0: &Matrix) -> f64 {
    let d = w.rows();
    let mut best = f64::INFINITY;
    for p in permutations(d) {
        for mask in 0u32..(1 << d) {
            let mut total = 0.0;
            for i in 0..d {
                let sign = if mask & (1 << i) != 0 { -1.0 } else { 1.0 };
                for c in 0..d {
                    let diff = w[(i, c)] - sign * w0[(p[i], c)];
                    total += diff * diff;
                }
            }
            best = best.min(total);
        }
    }
    libm::sqrt(best)
}
