use pgica_core::metrics::{amari_distance, canonical_representative, exhaustive::permutations, signed_perm_distance};
use pgica_core::numerics::{log_abs_det, lu_det_inverse};
use pgica_core::Matrix;
use proptest::prelude::*;

fn square(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, d * d).prop_map(move |v| Matrix::new(d, d, v).unwrap())
}

fn signed_perm(perm: &[usize], signs: u32) -> Matrix {
    let d = perm.len();
    Matrix::from_fn(d, d, |i, j| {
        if perm[i] != j {
            0.0
        } else if signs >> i & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    })
}

fn all_signed_perms(d: usize) -> Vec<Matrix> {
    permutations(d).iter().flat_map(|p| (0..1u32 << d).map(move |s| signed_perm(p, s))).collect()
}

/// Smallest `‖DP·W − W‖_F` over non-trivial signed permutations.
fn orbit_gap(w: &Matrix) -> f64 {
    let id = Matrix::identity(w.rows());
    all_signed_perms(w.rows())
        .iter()
        .filter(|dp| **dp != id)
        .map(|dp| (&dp.matmul(w) - w).frobenius_norm())
        .fold(f64::INFINITY, f64::min)
}

fn well_conditioned(m: &Matrix) -> bool {
    pgica_core::numerics::condition_number(m).is_ok_and(|c| c < 50.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_of_inverse_is_reciprocal(m in square(4)) {
        prop_assume!(well_conditioned(&m));
        let (det, inv) = lu_det_inverse(&m).unwrap();
        let (det_inv, _) = lu_det_inverse(&inv).unwrap();
        prop_assert!((det * det_inv - 1.0).abs() < 1e-10);
        prop_assert!((log_abs_det(&m).unwrap() - det.abs().ln()).abs() < 1e-10);
        prop_assert!(m.matmul(&inv).max_abs_diff(&Matrix::identity(4)) < 1e-10);
    }

    #[test]
    fn metrics_ignore_signed_permutations(w in square(3), w0 in square(3), k in 0usize..48) {
        prop_assume!(well_conditioned(&w) && well_conditioned(&w0));
        let dp = &all_signed_perms(3)[k];
        let moved = dp.matmul(&w);
        let a = amari_distance(&w, &w0).unwrap();
        prop_assert!((amari_distance(&moved, &w0).unwrap() - a).abs() < 1e-10);
        prop_assert!((signed_perm_distance(&moved, &w0) - signed_perm_distance(&w, &w0)).abs() < 1e-10);
        prop_assert_eq!(canonical_representative(&moved), canonical_representative(&w));
    }

    #[test]
    fn amari_vanishes_on_the_scaled_orbit(w0 in square(3), k in 0usize..48, scales in prop::collection::vec(0.2f64..5.0, 3)) {
        prop_assume!(well_conditioned(&w0));
        let moved = Matrix::from_diag(&scales).matmul(&all_signed_perms(3)[k]).matmul(&w0);
        prop_assert!(amari_distance(&moved, &w0).unwrap() < 1e-10);
    }

    #[test]
    fn signed_perm_distance_is_frobenius_near_the_truth(
        d in 2usize..=4,
        raw in prop::collection::vec(-2.0f64..2.0, 16),
        dir in prop::collection::vec(-1.0f64..1.0, 16),
        frac in 0.01f64..0.99,
    ) {
        let w0 = canonical_representative(&Matrix::new(d, d, raw[..d * d].to_vec()).unwrap());
        prop_assume!(well_conditioned(&w0));
        let delta = Matrix::new(d, d, dir[..d * d].to_vec()).unwrap();
        let norm = delta.frobenius_norm();
        prop_assume!(norm > 1e-6);
        let radius = 0.5 * orbit_gap(&w0) * frac;
        let delta = delta.scale(radius / norm);
        let dist = signed_perm_distance(&(&w0 + &delta), &w0);
        prop_assert!((dist - delta.frobenius_norm()).abs() < 1e-12 * (1.0 + dist));
    }
}
