//! Identifiability-aware scoring of ICA estimates.
//!
//! ICA recovers sources only up to permutation, sign and scale, so every
//! metric here is either invariant to that group by construction (Amari,
//! SRC) or evaluated after an explicit optimal matching (alignment, `d±`).
//!
//! Conventions:
//! - `amari_distance(w_hat, w_true)` uses `P = w_hat · w_true⁻¹`, which is a
//!   scaled signed permutation exactly when `w_hat = D·Π·w_true`.
//! - `Alignment::permutation[i]` is the true-source index matched to
//!   estimated column `i`.
//! - `rmse` expects `Ŝ` and `Â` aligned consistently (same signed column
//!   permutation), which leaves the product `Ŝ·Âᵀ` unchanged.

mod hungarian;
pub mod exhaustive;

use alloc::vec::Vec;

pub use hungarian::{assignment_cost, hungarian};

use crate::error::{Error, Result};
use crate::numerics::{inverse, Matrix};
use crate::stats::correlation;

/// Signed permutation matching estimated sources to true sources.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `permutation[i]` = true index matched to estimated index `i`.
    pub permutation: Vec<usize>,
    /// Sign applied to estimated column `i`.
    pub signs: Vec<f64>,
    /// `|corr|` of each matched pair, indexed by estimated column.
    pub matched_abs_corr: Vec<f64>,
}

impl Alignment {
    pub fn identity(d: usize) -> Self {
        Alignment {
            permutation: (0..d).collect(),
            signs: alloc::vec![1.0; d],
            matched_abs_corr: alloc::vec![1.0; d],
        }
    }

    /// `inverse[j]` = estimated index matched to true index `j`.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = alloc::vec![0; self.permutation.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }

    /// Reorders and sign-flips the columns of `Ŝ` (or of a mixing estimate
    /// `Â`) into the true source order.
    pub fn apply_columns(&self, m: &Matrix) -> Matrix {
        let inv = self.inverse_permutation();
        Matrix::from_fn(m.rows(), m.cols(), |r, j| self.signs[inv[j]] * m[(r, inv[j])])
    }

    /// Same as [`Alignment::apply_columns`] for the rows of an unmixing matrix.
    pub fn apply_rows(&self, w: &Matrix) -> Matrix {
        let inv = self.inverse_permutation();
        Matrix::from_fn(w.rows(), w.cols(), |j, c| self.signs[inv[j]] * w[(inv[j], c)])
    }
}

/// Scores for one estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub amari: f64,
    pub src: f64,
    pub rmse: f64,
    pub d_pm: Option<f64>,
}

fn column_corr(a: &Matrix, i: usize, b: &Matrix, j: usize) -> Result<f64> {
    correlation(&a.col(i), &b.col(j)).ok_or(Error::DegenerateColumn { column: j })
}

fn check_degenerate(m: &Matrix) -> Result<()> {
    for j in 0..m.cols() {
        let c = m.col(j);
        if c.iter().all(|&v| v == c[0]) {
            return Err(Error::DegenerateColumn { column: j });
        }
    }
    Ok(())
}

/// Matches estimated sources to true sources by maximizing total `|corr|`.
pub fn align_sources(s_hat: &Matrix, s_true: &Matrix) -> Result<Alignment> {
    if s_hat.shape() != s_true.shape() {
        return Err(Error::dims(
            alloc::format!("{:?}", s_true.shape()),
            alloc::format!("{:?}", s_hat.shape()),
        ));
    }
    check_degenerate(s_hat)?;
    check_degenerate(s_true)?;
    let d = s_hat.cols();
    let mut corr = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            corr[(i, j)] = column_corr(s_hat, i, s_true, j)?;
        }
    }
    let cost = corr.map(|c| 1.0 - c.abs());
    let permutation = hungarian(&cost);
    let signs = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| if corr[(i, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let matched_abs_corr = permutation.iter().enumerate().map(|(i, &j)| corr[(i, j)].abs()).collect();
    Ok(Alignment { permutation, signs, matched_abs_corr })
}

/// Amari distance with `P = Ŵ · W_true⁻¹`; zero iff `P` is a scaled signed
/// permutation, i.e. iff `Ŵ` equals `W_true` up to row scaling, sign and order.
pub fn amari_distance(w_hat: &Matrix, w_true: &Matrix) -> Result<f64> {
    if w_hat.shape() != w_true.shape() || !w_hat.is_square() {
        return Err(Error::dims(
            alloc::format!("square {:?}", w_true.shape()),
            alloc::format!("{:?}", w_hat.shape()),
        ));
    }
    // Both must be nonsingular.
    inverse(w_hat)?;
    let p = w_hat.matmul(&inverse(w_true)?);
    let d = p.rows();
    if d == 1 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..d {
        let row: Vec<f64> = p.row(i).iter().map(|v| v.abs()).collect();
        let max = row.iter().fold(0.0f64, |m, &v| m.max(v));
        total += row.iter().sum::<f64>() / max - 1.0;
    }
    for j in 0..d {
        let col: Vec<f64> = p.col(j).iter().map(|v| v.abs()).collect();
        let max = col.iter().fold(0.0f64, |m, &v| m.max(v));
        total += col.iter().sum::<f64>() / max - 1.0;
    }
    Ok(total / (2.0 * (d as f64 - 1.0)))
}

/// Source recovery correlation: mean `|corr|` of matching columns.
pub fn src(s_hat_aligned: &Matrix, s_true: &Matrix) -> Result<f64> {
    if s_hat_aligned.shape() != s_true.shape() {
        return Err(Error::dims(
            alloc::format!("{:?}", s_true.shape()),
            alloc::format!("{:?}", s_hat_aligned.shape()),
        ));
    }
    let d = s_true.cols();
    let mut total = 0.0;
    for k in 0..d {
        total += column_corr(s_hat_aligned, k, s_true, k)?.abs();
    }
    Ok(total / d as f64)
}

/// Per-column `|corr|` after alignment.
pub fn src_per_component(s_hat_aligned: &Matrix, s_true: &Matrix) -> Result<Vec<f64>> {
    (0..s_true.cols()).map(|k| Ok(column_corr(s_hat_aligned, k, s_true, k)?.abs())).collect()
}

/// `‖X − Ŝ·Âᵀ‖_F / √(n d)`.
pub fn rmse(x: &Matrix, s_hat_aligned: &Matrix, a_hat: &Matrix) -> Result<f64> {
    if s_hat_aligned.rows() != x.rows() || a_hat.rows() != x.cols() || a_hat.cols() != s_hat_aligned.cols() {
        return Err(Error::dims(
            alloc::format!("S {}x{} with A {}x{}", x.rows(), a_hat.cols(), x.cols(), s_hat_aligned.cols()),
            alloc::format!("S {:?}, A {:?}", s_hat_aligned.shape(), a_hat.shape()),
        ));
    }
    let resid = x - &s_hat_aligned.matmul_t(a_hat);
    Ok(resid.frobenius_norm() / libm::sqrt((x.rows() * x.cols()) as f64))
}

fn sq_dist(a: &[f64], b: &[f64], sign: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - sign * y) * (x - sign * y)).sum()
}

/// `min_{D,P} ‖W − D·P·W0‖_F` over signed permutation matrices.
///
/// Exact via assignment: the objective separates into row costs
/// `c(i, j) = min(‖w_i − w0_j‖², ‖w_i + w0_j‖²)` once the permutation is
/// fixed, since each row's sign only affects its own term.
pub fn signed_perm_distance(w: &Matrix, w0: &Matrix) -> f64 {
    assert_eq!(w.shape(), w0.shape(), "signed_perm_distance: shape mismatch");
    let d = w.rows();
    let cost = Matrix::from_fn(d, d, |i, j| {
        sq_dist(w.row(i), w0.row(j), 1.0).min(sq_dist(w.row(i), w0.row(j), -1.0))
    });
    let perm = hungarian(&cost);
    libm::sqrt(assignment_cost(&cost, &perm))
}

/// Canonical member of the signed-permutation orbit of `w`: each row is
/// flipped so its largest-magnitude entry is positive, then rows are ordered
/// by the column index of that entry. Rows sharing a column are ordered
/// lexicographically, so the result depends only on the orbit.
pub fn canonical_representative(w: &Matrix) -> Matrix {
    let argmax = |r: &[f64]| (0..r.len()).fold(0, |best, j| if r[j].abs() > r[best].abs() { j } else { best });
    let mut rows: Vec<(usize, Vec<f64>)> = (0..w.rows())
        .map(|i| {
            let r = w.row(i);
            let k = argmax(r);
            let sign = if r[k] < 0.0 { -1.0 } else { 1.0 };
            (k, r.iter().map(|v| sign * v).collect())
        })
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
        })
    });
    let data = rows.into_iter().flat_map(|(_, r)| r).collect();
    Matrix::from_vec_unchecked(w.rows(), w.cols(), data)
}

/// All metrics for an estimate `(Ŵ, Ŝ)` against ground truth `(A, S)`.
///
/// `Â = Ŵ⁻¹` is aligned together with `Ŝ` before the RMSE. `d±` is computed
/// against `W = A⁻¹` when `with_dpm` is set.
pub fn evaluate(
    x: &Matrix,
    w_hat: &Matrix,
    s_hat: &Matrix,
    a_true: &Matrix,
    s_true: &Matrix,
    with_dpm: bool,
) -> Result<(MetricsReport, Alignment)> {
    let w_true = inverse(a_true)?;
    let amari = amari_distance(w_hat, &w_true)?;
    let alignment = align_sources(s_hat, s_true)?;
    let s_aligned = alignment.apply_columns(s_hat);
    let a_aligned = alignment.apply_columns(&inverse(w_hat)?);
    let src_value = src(&s_aligned, s_true)?;
    let rmse_value = rmse(x, &s_aligned, &a_aligned)?;
    let d_pm = with_dpm.then(|| signed_perm_distance(w_hat, &w_true));
    Ok((MetricsReport { amari, src: src_value, rmse: rmse_value, d_pm }, alignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use alloc::vec;

    fn gaussian_matrix(r: usize, c: usize, rng: &mut RngStream) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.standard_normal())
    }

    fn signed_perm_matrix(perm: &[usize], signs: &[f64]) -> Matrix {
        let d = perm.len();
        Matrix::from_fn(d, d, |i, j| if perm[i] == j { signs[i] } else { 0.0 })
    }

    #[test]
    fn alignment_of_identity_and_flipped_swap() {
        let mut rng = RngStream::new(1, 0);
        let s = gaussian_matrix(200, 2, &mut rng);
        let a = align_sources(&s, &s).unwrap();
        assert_eq!(a.permutation, vec![0, 1]);
        assert_eq!(a.signs, vec![1.0, 1.0]);
        assert!(a.matched_abs_corr.iter().all(|&c| (c - 1.0).abs() < 1e-12));

        let flipped = Matrix::from_fn(200, 2, |i, j| -s[(i, 1 - j)]);
        let a = align_sources(&flipped, &s).unwrap();
        assert_eq!(a.permutation, vec![1, 0]);
        assert_eq!(a.signs, vec![-1.0, -1.0]);
        assert!(a.apply_columns(&flipped).max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn noisy_alignment_recovers_identity() {
        let mut rng = RngStream::new(17, 0);
        let s = gaussian_matrix(500, 4, &mut rng);
        let noise = gaussian_matrix(500, 4, &mut rng);
        let mut s_hat = s.clone();
        s_hat.add_scaled(&noise, 0.1);
        let a = align_sources(&s_hat, &s).unwrap();
        assert_eq!(a.permutation, vec![0, 1, 2, 3]);
        assert!(a.matched_abs_corr.iter().all(|&c| c >= 0.95));
    }

    #[test]
    fn degenerate_column_is_an_error() {
        let s = Matrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        assert_eq!(align_sources(&s, &s), Err(Error::DegenerateColumn { column: 0 }));
        assert!(matches!(src(&s, &s), Err(Error::DegenerateColumn { .. })));
    }

    #[test]
    fn amari_examples() {
        let i2 = Matrix::identity(2);
        let w_hat = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(amari_distance(&w_hat, &i2).unwrap(), 1.0);
        let mut rng = RngStream::new(3, 0);
        let w = gaussian_matrix(4, 4, &mut rng);
        assert!(amari_distance(&w, &w).unwrap() < 1e-12);
        let dp = signed_perm_matrix(&[2, 0, 3, 1], &[-1.0, 1.0, 1.0, -1.0]);
        let scaled = Matrix::from_diag(&[0.5, 3.0, 1.5, 7.0]).matmul(&dp).matmul(&w);
        assert!(amari_distance(&scaled, &w).unwrap() < 1e-10);
        let sing = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!(matches!(amari_distance(&sing, &i2), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn src_examples() {
        let mut rng = RngStream::new(4, 0);
        let s = gaussian_matrix(10_000, 3, &mut rng);
        assert!((src(&s, &s).unwrap() - 1.0).abs() < 1e-12);
        assert!((src(&s.scale(0.5), &s).unwrap() - 1.0).abs() < 1e-12);
        let noise = gaussian_matrix(10_000, 3, &mut rng);
        assert!(src(&noise, &s).unwrap() <= 0.05);
    }

    #[test]
    fn rmse_examples() {
        let mut rng = RngStream::new(5, 0);
        let s = gaussian_matrix(50, 3, &mut rng);
        let a = gaussian_matrix(3, 3, &mut rng);
        let x = s.matmul_t(&a);
        assert!(rmse(&x, &s, &a).unwrap() < 1e-14);
        let shifted = x.map(|v| v + 0.3);
        assert!((rmse(&shifted, &s, &a).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dpm_examples_and_scale_asymmetry() {
        let mut rng = RngStream::new(6, 0);
        let w0 = gaussian_matrix(2, 2, &mut rng);
        assert_eq!(signed_perm_distance(&w0, &w0), 0.0);
        let flipped = Matrix::from_diag(&[1.0, -1.0]).matmul(&w0);
        assert_eq!(signed_perm_distance(&flipped, &w0), 0.0);
        let rescaled = Matrix::from_diag(&[2.0, 1.0]).matmul(&w0);
        assert!(signed_perm_distance(&rescaled, &w0) > 0.1);
        assert!(amari_distance(&rescaled, &w0).unwrap() < 1e-12);
    }

    #[test]
    fn canonical_representative_is_orbit_invariant() {
        let mut rng = RngStream::new(8, 0);
        let w = gaussian_matrix(4, 4, &mut rng);
        let c = canonical_representative(&w);
        let dp = signed_perm_matrix(&[3, 1, 0, 2], &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(canonical_representative(&dp.matmul(&w)), c);
        for i in 0..4 {
            let r = c.row(i);
            let m = r.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            assert!(m > 0.0);
        }
    }
}
