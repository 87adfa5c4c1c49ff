//! Point estimators of the unmixing matrix: EM / auxiliary-function ascent,
//! MacKay's natural-gradient rule and a FastICA baseline.
//!
//! EM and MacKay work on raw `X`; only FastICA whitens.

mod em;
mod fastica;

use alloc::vec::Vec;

pub use em::{
    em_estep, em_mstep, envelope, envelope_offset, envelope_weight, objective, ono_update, run_em, run_ono,
    tanh_ratio, EmState, ASCENT_SLACK, RIDGE, SERIES_CUTOFF,
};
pub use fastica::{fastica, FastIcaResult};

use crate::error::{Error, Result};
use crate::numerics::{dot, Lu, Matrix, SymmetricEigen};

/// One natural-gradient step `W ← W + η(I − Ê[tanh(a)aᵀ])W`, `a = W·x`.
pub fn mackay_step(w: &Matrix, x_batch: &Matrix, eta: f64) -> Result<Matrix> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid(alloc::format!("step size must be non-negative, got {eta}")));
    }
    let d = w.rows();
    let n = x_batch.rows();
    let mut g = Matrix::zeros(d, d);
    let mut a = alloc::vec![0.0; d];
    for r in 0..n {
        let xr = x_batch.row(r);
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = dot(w.row(i), xr);
        }
        for i in 0..d {
            let t = libm::tanh(a[i]);
            for j in 0..d {
                g[(i, j)] += t * a[j];
            }
        }
    }
    let mut step = Matrix::identity(d);
    step.add_scaled(&g, -1.0 / n as f64);
    let mut next = w.clone();
    next.add_scaled(&step.matmul(w), eta);
    Lu::factor(&next)?;
    Ok(next)
}

/// Full-batch MacKay iterations until `|Δℓ| < tol`. Unlike EM there is no
/// ascent guarantee, so no divergence check is made.
pub fn run_mackay(x: &Matrix, w0: &Matrix, eta: f64, max_iter: usize, tol: f64) -> Result<EmState> {
    let mut w = w0.clone();
    let mut loglik = objective(&w, x)?;
    let mut history = alloc::vec![loglik];
    let mut iteration = 0;
    let mut converged = false;
    while iteration < max_iter {
        iteration += 1;
        w = mackay_step(&w, x, eta)?;
        let next = objective(&w, x)?;
        let delta = next - loglik;
        loglik = next;
        history.push(loglik);
        if delta.abs() < tol {
            converged = true;
            break;
        }
    }
    Ok(EmState { w, iteration, loglik, history, converged })
}

/// Column means of `x`.
pub fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    (0..x.cols()).map(|j| x.col(j).iter().sum::<f64>() / n).collect()
}

/// Zero-mean, identity-covariance transform `z = K·(x − m)`, with
/// `K = Λ^{-1/2}Eᵀ` from the eigen-decomposition of the sample covariance.
pub fn whiten(x: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = x.shape();
    if n <= d {
        return Err(Error::InsufficientSamples { have: n, need: d + 1 });
    }
    let mean = column_means(x);
    let centered = Matrix::from_fn(n, d, |r, c| x[(r, c)] - mean[c]);
    let cov = centered.t_matmul(&centered).scale(1.0 / n as f64).symmetrize();
    let eig = SymmetricEigen::new(&cov)?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    if eig.values[0] <= 1e-12 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularMatrix { pivot: eig.values[0] });
    }
    let k = Matrix::from_fn(d, d, |i, j| eig.vectors[(j, i)] / libm::sqrt(eig.values[i]));
    Ok((mean, k))
}

/// Rows of `(x − mean)·Kᵀ`; the mean is recomputed from `x`.
pub fn apply_whitening(x: &Matrix, k: &Matrix) -> Matrix {
    let mean = column_means(x);
    let centered = Matrix::from_fn(x.rows(), x.cols(), |r, c| x[(r, c)] - mean[c]);
    centered.matmul_t(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_benchmark;
    use crate::distributions::SourceFamily;

    #[test]
    fn mackay_zero_step_and_stationary_point() {
        let ds = generate_benchmark(SourceFamily::sech(), 200, 3, 0.01, 2).unwrap();
        let w = Matrix::identity(3);
        assert_eq!(mackay_step(&w, &ds.x, 0.0).unwrap(), w);

        // d=1, x = ±c with c·tanh(c) = 1 makes Ê[tanh(a)a] = 1 at W = 1.
        let (mut lo, mut hi) = (0.5f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * libm::tanh(mid) < 1.0 { lo = mid } else { hi = mid }
        }
        let c = 0.5 * (lo + hi);
        let x = Matrix::from_rows(&[&[c], &[-c]]).unwrap();
        let next = mackay_step(&Matrix::identity(1), &x, 0.5).unwrap();
        assert!((next[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mackay_step_ascends_from_identity() {
        let ds = generate_benchmark(SourceFamily::sech(), 500, 4, 0.01, 7).unwrap();
        let w = Matrix::identity(4);
        let next = mackay_step(&w, &ds.x, 0.01).unwrap();
        assert!(objective(&next, &ds.x).unwrap() > objective(&w, &ds.x).unwrap());
    }

    #[test]
    fn whitening_gives_identity_covariance() {
        let ds = generate_benchmark(SourceFamily::laplace(), 400, 3, 0.05, 1).unwrap();
        let (_, k) = whiten(&ds.x).unwrap();
        let z = apply_whitening(&ds.x, &k);
        let cov = z.t_matmul(&z).scale(1.0 / 400.0);
        assert!(cov.max_abs_diff(&Matrix::identity(3)) < 1e-10);
        assert!(column_means(&z).iter().all(|m| m.abs() < 1e-12));
    }
}
