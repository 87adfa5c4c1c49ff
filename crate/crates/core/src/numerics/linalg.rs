//! Small dense factorizations: pivoted LU, Cholesky, and a cyclic Jacobi
//! eigensolver for symmetric matrices. Dimensions in this toolkit stay below
//! a few dozen, so everything is unblocked.

use alloc::vec::Vec;

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Tolerance on `|M - Mᵀ|` accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::dims("non-empty square matrix", alloc::format!("{}x{}", a.rows(), a.cols())));
        }
        let n = a.rows();
        let scale = a.max_abs();
        let tol = SINGULAR_RTOL * scale;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tol || scale == 0.0 {
                return Err(Error::SingularMatrix { pivot });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn det(&self) -> f64 {
        self.sign * self.lu.diag().iter().product::<f64>()
    }

    /// `log|det A|`, accumulated in log space so it does not overflow.
    pub fn log_abs_det(&self) -> f64 {
        self.lu.diag().iter().map(|v| libm::log(v.abs())).sum()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim());
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim()))
    }
}

/// Determinant and inverse of a square matrix via pivoted LU.
pub fn lu_det_inverse(a: &Matrix) -> Result<(f64, Matrix)> {
    let lu = Lu::factor(a)?;
    Ok((lu.det(), lu.inverse()))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::factor(a)?.inverse())
}

pub fn log_abs_det(a: &Matrix) -> Result<f64> {
    Ok(Lu::factor(a)?.log_abs_det())
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::dims("non-empty square matrix", alloc::format!("{}x{}", m.rows(), m.cols())));
    }
    let tol = SYMMETRY_TOL * m.max_abs().max(1.0);
    for i in 0..m.rows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::invalid(alloc::format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Cholesky factor `M = L·Lᵀ` of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(m: &Matrix) -> Result<Cholesky> {
        check_symmetric(m)?;
        Self::factor_unchecked(m)
    }

    /// Factors using only the lower triangle; the caller guarantees symmetry.
    pub(crate) fn factor_unchecked(m: &Matrix) -> Result<Cholesky> {
        let n = m.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let s = dot(&l.row(j)[..j], &l.row(j)[..j]);
            let pivot = m[(j, j)] - s;
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let ljj = libm::sqrt(pivot);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = (m[(i, j)] - s) / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|v| libm::log(*v)).sum::<f64>()
    }

    /// Solves `L·y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        for i in 0..self.dim() {
            let s = dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = (b[i] - s) / self.l[(i, i)];
        }
    }

    /// Solves `Lᵀ·x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in i + 1..n {
                s += self.l[(k, i)] * y[k];
            }
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim());
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim())).symmetrize()
    }
}

/// Solves `M·X = B` for symmetric positive-definite `M` without forming `M⁻¹`.
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    if b.rows() != m.rows() {
        return Err(Error::dims(alloc::format!("{} rows", m.rows()), b.rows()));
    }
    Ok(Cholesky::factor(m)?.solve(b))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn new(m: &Matrix) -> Result<SymmetricEigen> {
        check_symmetric(m)?;
        let n = m.rows();
        let mut a = m.symmetrize();
        let mut v = Matrix::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let total: f64 = a.data().iter().map(|x| x * x).sum();
            if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = v.select_columns(&order);
        Ok(SymmetricEigen { values, vectors })
    }

    /// `V·diag(f(λ))·Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)]).sum())
    }
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let ata = a.t_matmul(a).symmetrize();
    let eig = SymmetricEigen::new(&ata)?;
    let mut s: Vec<f64> = eig.values.iter().rev().map(|&l| libm::sqrt(l.max(0.0))).collect();
    s.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(s)
}

/// 2-norm condition number `σ_max / σ_min`; infinite when singular.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let s = singular_values(a)?;
    let (hi, lo) = (s[0], *s.last().unwrap_or(&0.0));
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_matrix(n: usize, seed: u64) -> Matrix {
        let mut rng = RngStream::new(seed, 0);
        Matrix::from_fn(n, n, |_, _| rng.standard_normal())
    }

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let b = random_matrix(n, seed);
        let mut m = b.t_matmul(&b).symmetrize();
        m.add_diag(n as f64 * 0.1);
        m
    }

    #[test]
    fn identity_and_diagonal_cases() {
        let (det, inv) = lu_det_inverse(&Matrix::identity(3)).unwrap();
        assert_eq!(det, 1.0);
        assert_eq!(inv, Matrix::identity(3));
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.5]]).unwrap();
        let (det, inv) = lu_det_inverse(&a).unwrap();
        assert_eq!(det, 1.0);
        assert_eq!(inv, Matrix::from_rows(&[&[0.5, 0.0], &[0.0, 2.0]]).unwrap());
    }

    #[test]
    fn inverse_residual_on_random_4x4() {
        let a = random_matrix(4, 7);
        let (_, inv) = lu_det_inverse(&a).unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&Matrix::identity(4)) < 1e-10);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(Lu::factor(&a), Err(Error::SingularMatrix { .. })));
        let tiny = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1e-13]]).unwrap();
        assert!(matches!(Lu::factor(&tiny), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn spd_solve_examples() {
        let b = Matrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
        assert_eq!(solve_spd(&Matrix::identity(2), &b).unwrap(), b);
        let m = Matrix::from_rows(&[&[4.0, 0.0], &[0.0, 9.0]]).unwrap();
        let b = Matrix::from_rows(&[&[8.0], &[27.0]]).unwrap();
        assert_eq!(solve_spd(&m, &b).unwrap(), Matrix::from_rows(&[&[2.0], &[3.0]]).unwrap());

        let m = random_spd(5, 11);
        let mut rng = RngStream::new(11, 1);
        let b = Matrix::from_fn(5, 3, |_, _| rng.standard_normal());
        let x = solve_spd(&m, &b).unwrap();
        let resid = &m.matmul(&x) - &b;
        assert!(resid.frobenius_norm() <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn not_positive_definite() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::factor(&m), Err(Error::NotPositiveDefinite { .. })));
        let asym = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(matches!(Cholesky::factor(&asym), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn spd_solve_agrees_with_lu_up_to_16() {
        for n in [1usize, 2, 5, 9, 16] {
            let m = random_spd(n, 100 + n as u64);
            let mut rng = RngStream::new(200 + n as u64, 0);
            let b = Matrix::from_fn(n, 2, |_, _| rng.standard_normal());
            let x1 = solve_spd(&m, &b).unwrap();
            let x2 = Lu::factor(&m).unwrap().solve(&b);
            assert!(x1.max_abs_diff(&x2) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn eigen_reconstructs() {
        let m = random_spd(6, 3);
        let eig = SymmetricEigen::new(&m).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let back = eig.map_values(|l| l);
        assert!(back.max_abs_diff(&m) < 1e-10);
        let inv_sqrt = eig.map_values(|l| 1.0 / libm::sqrt(l));
        let white = inv_sqrt.matmul(&m).matmul(&inv_sqrt);
        assert!(white.max_abs_diff(&Matrix::identity(6)) < 1e-9);
    }

    #[test]
    fn condition_number_of_diagonal() {
        let a = Matrix::from_diag(&[10.0, -2.0, 1.0]);
        assert!((condition_number(&a).unwrap() - 10.0).abs() < 1e-12);
    }
}
