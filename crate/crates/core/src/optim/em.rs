//! EM for the unmixing matrix under the `1/cosh` source prior, and the same
//! iteration written as Ono's auxiliary-function method.
//!
//! The Pólya-Gamma mixture turns each `log cosh(w_iᵀx)` into a Gaussian term
//! with weight `tanh(u)/(2u)`, `u = w_iᵀx`. The E-step averages these weights
//! into `Z_i = Ê[tanh(u)/(2u)·xxᵀ]`; the M-step maximizes
//! `log|det W| − Σ_i w_iᵀZ_iw_i` one row at a time (Gauss–Seidel). Its
//! stationarity conditions are `2·w_jᵀZ_iw_i = δ_ij`, so every updated row is
//! normalized to `w_iᵀZ_iw_i = 1/2`.

use alloc::vec::Vec;

use crate::distributions::log_cosh;
use crate::error::{Error, Result};
use crate::numerics::{dot, log_abs_det, Lu, Matrix};

/// Below this `|u|`, `tanh(u)/u` is evaluated by its Taylor series.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// Ridge added to a singular `W·Z_i` before giving up.
pub const RIDGE: f64 = 1e-10;

/// Largest tolerated decrease of the objective between iterations.
pub const ASCENT_SLACK: f64 = 1e-8;

/// `tanh(u)/u`, with the series `1 − u²/3 + 2u⁴/15` near zero.
pub fn tanh_ratio(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        let u2 = u * u;
        1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0
    } else {
        libm::tanh(u) / u
    }
}

/// `ℓ(W) = log|det W| − Σ_i Ê log cosh(w_iᵀx)`.
pub fn objective(w: &Matrix, x: &Matrix) -> Result<f64> {
    let ld = log_abs_det(w)?;
    let n = x.rows() as f64;
    let mut total = 0.0;
    for r in 0..x.rows() {
        let xr = x.row(r);
        for i in 0..w.rows() {
            total += log_cosh(dot(w.row(i), xr));
        }
    }
    Ok(ld - total / n)
}

fn weighted_second_moment(x: &Matrix, weights: impl Fn(usize) -> f64) -> Matrix {
    let (n, d) = x.shape();
    let mut z = Matrix::zeros(d, d);
    for r in 0..n {
        let xr = x.row(r);
        let g = weights(r);
        for a in 0..d {
            let ga = g * xr[a];
            for b in a..d {
                z[(a, b)] += ga * xr[b];
            }
        }
    }
    let scale = 1.0 / n as f64;
    for a in 0..d {
        for b in a..d {
            let v = z[(a, b)] * scale;
            z[(a, b)] = v;
            z[(b, a)] = v;
        }
    }
    z
}

/// E-step: `Z_i = Ê[tanh(w_iᵀx)/(2·w_iᵀx)·xxᵀ]` for every row of `W`.
pub fn em_estep(w: &Matrix, x: &Matrix) -> Vec<Matrix> {
    (0..w.rows())
        .map(|i| {
            let wi = w.row(i);
            weighted_second_moment(x, |r| 0.5 * tanh_ratio(dot(wi, x.row(r))))
        })
        .collect()
}

/// `w ← (W·Z)⁻¹e_i`, normalized to `wᵀZw = 1/2`. Regularizes `Z` once if
/// `W·Z` is singular.
fn solve_row(w: &Matrix, z: &Matrix, i: usize) -> Result<Vec<f64>> {
    let lu = match Lu::factor(&w.matmul(z)) {
        Ok(lu) => lu,
        Err(_) => {
            let mut zr = z.clone();
            zr.add_diag(RIDGE);
            Lu::factor(&w.matmul(&zr))?
        }
    };
    let mut e = alloc::vec![0.0; w.rows()];
    e[i] = 1.0;
    let mut wi = lu.solve_vec(&e);
    let q = dot(&wi, &z.mat_vec(&wi));
    if !(q > 0.0) {
        return Err(Error::SingularMatrix { pivot: q });
    }
    let c = 1.0 / libm::sqrt(2.0 * q);
    wi.iter_mut().for_each(|v| *v *= c);
    Ok(wi)
}

/// Gauss–Seidel M-step: rows are replaced in index order, each solve using
/// the rows already updated in this sweep.
pub fn em_mstep(z: &[Matrix], w_current: &Matrix) -> Result<Matrix> {
    let d = w_current.rows();
    if z.len() != d {
        return Err(Error::dims(alloc::format!("{d} Z matrices"), z.len()));
    }
    let mut w = w_current.clone();
    for (i, zi) in z.iter().enumerate() {
        let wi = solve_row(&w, zi, i)?;
        w.row_mut(i).copy_from_slice(&wi);
    }
    Ok(w)
}

/// Result of an EM (or other ascent) run.
#[derive(Clone, Debug, PartialEq)]
pub struct EmState {
    pub w: Matrix,
    pub iteration: usize,
    pub loglik: f64,
    /// Objective at the start and after every iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn check_start(x: &Matrix, w0: &Matrix) -> Result<()> {
    if !w0.is_square() || w0.rows() != x.cols() {
        return Err(Error::dims(alloc::format!("{0}x{0} W0", x.cols()), alloc::format!("{:?}", w0.shape())));
    }
    Lu::factor(w0).map(|_| ())
}

fn ascend(
    x: &Matrix,
    w0: &Matrix,
    max_iter: usize,
    tol: f64,
    mut update: impl FnMut(&Matrix) -> Result<Matrix>,
) -> Result<EmState> {
    check_start(x, w0)?;
    let mut w = w0.clone();
    let mut loglik = objective(&w, x)?;
    let mut history = alloc::vec![loglik];
    let mut converged = false;
    let mut iteration = 0;
    while iteration < max_iter {
        iteration += 1;
        w = update(&w)?;
        let next = objective(&w, x)?;
        if !next.is_finite() {
            return Err(Error::non_finite(alloc::format!("objective at iteration {iteration}")));
        }
        if next < loglik - ASCENT_SLACK {
            return Err(Error::Diverged { iteration, drop: loglik - next });
        }
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

/// Alternates E- and M-steps until `|Δℓ| < tol` or `max_iter`.
pub fn run_em(x: &Matrix, w0: &Matrix, max_iter: usize, tol: f64) -> Result<EmState> {
    ascend(x, w0, max_iter, tol, |w| em_mstep(&em_estep(w, x), w))
}

/// Ono's auxiliary-function update. Slack variables `r_ni = |w_iᵀx_n|` are
/// set from the current `W`, which makes the majorizer
/// `(φ′(r)/(2r))·u² + F(r)` of `φ = log cosh` tight at every sample; then
/// each row maximizes the resulting quadratic surrogate in turn.
pub fn ono_update(w: &Matrix, x: &Matrix) -> Result<Matrix> {
    let (n, d) = x.shape();
    let mut r = Matrix::zeros(n, d);
    for s in 0..n {
        for i in 0..d {
            r[(s, i)] = libm::fabs(dot(w.row(i), x.row(s)));
        }
    }
    let mut next = w.clone();
    for i in 0..d {
        let v = weighted_second_moment(x, |s| envelope_weight(r[(s, i)]));
        let wi = solve_row(&next, &v, i)?;
        next.row_mut(i).copy_from_slice(&wi);
    }
    Ok(next)
}

/// Curvature `φ′(r)/(2r)` of the quadratic majorizer of `log cosh` at slack `r`.
pub fn envelope_weight(r: f64) -> f64 {
    if r < SERIES_CUTOFF {
        0.5 * tanh_ratio(r)
    } else {
        libm::tanh(r) / (2.0 * r)
    }
}

/// `F(r) = φ(r) − rφ′(r)/2`, the offset of the majorizer.
pub fn envelope_offset(r: f64) -> f64 {
    log_cosh(r) - 0.5 * r * libm::tanh(r)
}

/// Quadratic majorizer of `log cosh(u)` with slack `r`.
pub fn envelope(u: f64, r: f64) -> f64 {
    envelope_weight(r) * u * u + envelope_offset(r)
}

/// Runs [`ono_update`] to convergence; same stopping and ascent checks as [`run_em`].
pub fn run_ono(x: &Matrix, w0: &Matrix, max_iter: usize, tol: f64) -> Result<EmState> {
    ascend(x, w0, max_iter, tol, |w| ono_update(w, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_benchmark;
    use crate::distributions::{pg_mean, SourceFamily};
    use crate::numerics::RngStream;

    /// Root of `w·tanh(w) = 1` by bisection: the scalar fixed point for `x = ±1`.
    fn scalar_fixed_point() -> f64 {
        let (mut lo, mut hi) = (0.5f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * libm::tanh(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn pm_one() -> Matrix {
        Matrix::from_rows(&[&[1.0], &[-1.0]]).unwrap()
    }

    #[test]
    fn estep_examples() {
        let z = em_estep(&Matrix::identity(1), &pm_one());
        assert!((z[0][(0, 0)] - libm::tanh(1.0) / 2.0).abs() < 1e-15);
        assert!((z[0][(0, 0)] - 0.380797).abs() < 1e-6);

        let zero = Matrix::zeros(1, 3);
        let mut rng = RngStream::new(1, 0);
        let w = Matrix::from_fn(3, 3, |_, _| rng.standard_normal());
        for zi in em_estep(&w, &zero) {
            assert_eq!(zi, Matrix::zeros(3, 3));
        }
        let x = Matrix::from_fn(40, 3, |_, _| rng.standard_normal());
        for zi in em_estep(&w, &x) {
            assert_eq!(zi, zi.transpose());
        }
    }

    #[test]
    fn tanh_ratio_branches_agree() {
        for &u in &[0.99e-4, 1.01e-4, -0.5e-4] {
            let direct = if u == 0.0 { 1.0 } else { libm::tanh(u) / u };
            assert!((tanh_ratio(u) - direct).abs() < 1e-15);
        }
        assert_eq!(tanh_ratio(0.0), 1.0);
    }

    #[test]
    fn scalar_mstep_and_fixed_point() {
        let z = 0.3;
        for &w0 in &[0.1, 2.0, -5.0] {
            let w = em_mstep(&[Matrix::from_rows(&[&[z]]).unwrap()], &Matrix::from_rows(&[&[w0]]).unwrap()).unwrap();
            assert!((w[(0, 0)].abs() - 1.0 / libm::sqrt(2.0 * z)).abs() < 1e-14);
        }
        // A zero tolerance runs every iteration; ℓ is flat to O(Δw²) near the optimum.
        let state = run_em(&pm_one(), &Matrix::identity(1), 2000, 0.0).unwrap();
        let target = scalar_fixed_point();
        assert!((target - 1.19967864).abs() < 1e-8);
        assert!((state.w[(0, 0)].abs() - target).abs() < 1e-8, "{}", state.w[(0, 0)]);
    }

    #[test]
    fn mstep_postcondition() {
        let mut rng = RngStream::new(9, 0);
        let x = Matrix::from_fn(200, 3, |_, _| rng.standard_normal() * 1.5);
        let w = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.2 * rng.standard_normal() });
        let z = em_estep(&w, &x);
        let next = em_mstep(&z, &w).unwrap();
        for (i, zi) in z.iter().enumerate() {
            let wi = next.row(i);
            assert!((dot(wi, &zi.mat_vec(wi)) - 0.5).abs() < 1e-8);
        }
        // The last row solves against every other (final) row.
        let last = next.row(2);
        for j in 0..2 {
            assert!(dot(next.row(j), &z[2].mat_vec(last)).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_point_is_returned_unchanged() {
        let ds = generate_benchmark(SourceFamily::sech(), 300, 3, 0.01, 4).unwrap();
        let mut w = run_em(&ds.x, &Matrix::identity(3), 5000, 1e-13).unwrap().w;
        for _ in 0..10_000 {
            let next = em_mstep(&em_estep(&w, &ds.x), &w).unwrap();
            let done = next.max_abs_diff(&w) < 1e-13;
            w = next;
            if done {
                break;
            }
        }
        let again = em_mstep(&em_estep(&w, &ds.x), &w).unwrap();
        assert!(again.max_abs_diff(&w) < 1e-10);
        let restart = run_em(&ds.x, &w, 100, 1e-12).unwrap();
        assert!(restart.iteration <= 2);
    }

    #[test]
    fn monotone_on_whitened_sech_data() {
        let ds = generate_benchmark(SourceFamily::sech(), 500, 4, 0.01, 1).unwrap();
        let (_, whiten) = crate::optim::whiten(&ds.x).unwrap();
        let xw = crate::optim::apply_whitening(&ds.x, &whiten);
        let state = run_em(&xw, &Matrix::identity(4), 300, 1e-12).unwrap();
        assert!(state.history.windows(2).all(|p| p[1] >= p[0]));
        assert!(state.history.len() > 10);
    }

    #[test]
    fn envelope_tangency() {
        for &u in &[0.3, 1.0, 2.0] {
            assert!((log_cosh(u) - envelope(u, u)).abs() < 1e-12);
            for &r in &[0.05, 0.5, 1.5, 3.0] {
                if (r - u).abs() > 1e-6 {
                    assert!(envelope(u, r) > log_cosh(u), "u={u} r={r}");
                }
            }
        }
    }

    #[test]
    fn weight_matches_pg_mean() {
        // φ′(u)/u = tanh(u)/u equals 4·E[PG(1, 2u)] = 4·tanh(u)/(4u).
        for k in 0..50 {
            let u = 0.01 + 0.2 * k as f64;
            assert!((tanh_ratio(u) - 4.0 * pg_mean(2.0 * u)).abs() < 1e-14);
            assert!((envelope_weight(u) - 0.5 * tanh_ratio(u)).abs() < 1e-15);
        }
    }

    #[test]
    fn ono_route_reproduces_em_iterates() {
        for seed in 0..5 {
            let ds = generate_benchmark(SourceFamily::sech(), 300, 3, 0.01, 100 + seed).unwrap();
            let mut w_em = Matrix::identity(3);
            let mut w_ono = Matrix::identity(3);
            for _ in 0..20 {
                w_em = em_mstep(&em_estep(&w_em, &ds.x), &w_em).unwrap();
                w_ono = ono_update(&w_ono, &ds.x).unwrap();
                assert!(w_em.max_abs_diff(&w_ono) < 1e-10);
            }
        }
    }
}
