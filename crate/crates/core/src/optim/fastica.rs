use crate::error::Result;
use crate::numerics::{dot, Matrix, RngStream, SymmetricEigen};

use super::{apply_whitening, whiten};

#[derive(Clone, Debug, PartialEq)]
pub struct FastIcaResult {
    /// Unmixing matrix for the original (unwhitened) coordinates.
    pub w: Matrix,
    pub iterations: usize,
    /// `false` when `max_iter` was reached; `w` is then the last iterate.
    pub converged: bool,
}

/// `(WWᵀ)^{-1/2}·W`.
fn symmetric_decorrelation(w: &Matrix) -> Result<Matrix> {
    let eig = SymmetricEigen::new(&w.matmul_t(w).symmetrize())?;
    Ok(eig.map_values(|l| 1.0 / libm::sqrt(l.max(f64::MIN_POSITIVE))).matmul(w))
}

/// Symmetric FastICA with the `log cosh` contrast (`g = tanh`).
///
/// Convergence is declared when every row of the new iterate is parallel to
/// the old one up to `tol`, i.e. `max_i |1 − |⟨w_i⁺, w_i⟩|| < tol`.
pub fn fastica(x: &Matrix, max_iter: usize, tol: f64, seed: u64) -> Result<FastIcaResult> {
    let (_, k) = whiten(x)?;
    let z = apply_whitening(x, &k);
    let (n, d) = z.shape();
    let mut rng = RngStream::new(seed, 0);
    let mut w = symmetric_decorrelation(&Matrix::from_fn(d, d, |_, _| rng.standard_normal()))?;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = Matrix::zeros(d, d);
        for i in 0..d {
            let wi = w.row(i);
            let mut mean_gp = 0.0;
            let row = next.row_mut(i);
            for r in 0..n {
                let zr = z.row(r);
                let g = libm::tanh(dot(wi, zr));
                mean_gp += 1.0 - g * g;
                for (acc, &zc) in row.iter_mut().zip(zr) {
                    *acc += g * zc;
                }
            }
            let inv_n = 1.0 / n as f64;
            mean_gp *= inv_n;
            for (acc, &wc) in row.iter_mut().zip(wi) {
                *acc = *acc * inv_n - mean_gp * wc;
            }
        }
        let next = symmetric_decorrelation(&next)?;
        let change = (0..d).map(|i| (1.0 - dot(next.row(i), w.row(i)).abs()).abs()).fold(0.0, f64::max);
        w = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(FastIcaResult { w: w.matmul(&k), iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_benchmark;
    use crate::distributions::SourceFamily;
    use crate::metrics::amari_distance;
    use crate::numerics::inverse;

    #[test]
    fn unmixed_laplace_input_gives_signed_permutation() {
        let mut rng = RngStream::new(1, 0);
        let fam = SourceFamily::laplace();
        let s = Matrix::from_fn(2000, 3, |_, _| fam.sample_one(&mut rng));
        let fit = fastica(&s, 500, 1e-10, 1).unwrap();
        assert!(fit.converged);
        assert!(amari_distance(&fit.w, &Matrix::identity(3)).unwrap() < 0.05);
    }

    #[test]
    fn gaussian_sources_do_not_crash() {
        let mut rng = RngStream::new(2, 0);
        let s = Matrix::from_fn(500, 3, |_, _| rng.standard_normal());
        let fit = fastica(&s, 50, 1e-12, 3).unwrap();
        assert!(fit.w.is_finite());
    }

    #[test]
    fn recovers_t3_benchmark_mixing() {
        let ds = generate_benchmark(SourceFamily::t3(), 500, 4, 0.01, 11).unwrap();
        let fit = fastica(&ds.x, 1000, 1e-10, 5).unwrap();
        let w_true = inverse(&ds.truth.unwrap().a).unwrap();
        assert!(amari_distance(&fit.w, &w_true).unwrap() < 0.15);
    }
}
