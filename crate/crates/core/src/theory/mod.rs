//! Diagnostics for the noiseless known-density model
//!
//! ```text
//! p_W(x) = |det W| ∏_k p_k(w_kᵀx),   θ = vec(W),
//! ```
//!
//! where `vec` stacks the rows of `W` (`θ[i·d + j] = W_ij`). The per-sample
//! log-likelihood `ℓ(W; x) = log|det W| + Σ_k log p_k(w_kᵀx)` has score
//! `W⁻ᵀ + ψ(Wx)xᵀ` and Hessian
//!
//! ```text
//! ∂²ℓ / ∂W_ij ∂W_kl = −(W⁻¹)_li (W⁻¹)_jk + δ_ik ψ_i′(s_i) x_j x_l .
//! ```
//!
//! Everything here is Monte Carlo on simulated sources with known laws: the
//! integration-by-parts identities, the Fisher information, the LAN remainder
//! and a random-walk Metropolis reference posterior for Bernstein–von Mises
//! checks.

mod lan;
mod posterior;

use alloc::vec::Vec;

pub use lan::{lan_remainder, lan_remainder_on, lan_study, random_direction, LanConfig, LanPoint, LanReport};
pub use posterior::{
    bvm_report, bvm_study, contraction_slope, log_posterior, rwm_posterior, BvmReport, BvmStudy, BvmStudyConfig,
    RwmConfig, RwmTrace,
};

use crate::datagen::well_conditioned_mixing;
use crate::distributions::SourceFamily;
use crate::error::{Error, Result};
use crate::metrics::canonical_representative;
use crate::numerics::{dot, inverse, Lu, Matrix, RngStream, SymmetricEigen};
use crate::stats::McEstimate;

/// Smallest Monte Carlo size accepted by the identity and information checks.
pub const MIN_MC_DRAWS: usize = 10_000;

/// Residuals beyond this many standard errors fail a Monte Carlo check.
pub const Z_THRESHOLD: f64 = 4.0;

/// Known source laws and the true unmixing matrix.
///
/// `w0` is stored as its canonical signed-permutation representative and the
/// families are permuted along with its rows. All families are symmetric, so
/// the sign flips leave the model unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiselessModel {
    families: Vec<SourceFamily>,
    w0: Matrix,
    a0: Matrix,
}

impl NoiselessModel {
    /// Identifiable model: at most one Gaussian family and `w0` nonsingular.
    pub fn new(families: Vec<SourceFamily>, w0: &Matrix) -> Result<Self> {
        if families.iter().filter(|f| f.is_gaussian()).count() > 1 {
            return Err(Error::invalid("at most one source family may be Gaussian"));
        }
        Self::allow_unidentified(families, w0)
    }

    /// Same as [`NoiselessModel::new`] without the Gaussian-count check, for
    /// probing the degenerate directions of the information matrix.
    pub fn allow_unidentified(families: Vec<SourceFamily>, w0: &Matrix) -> Result<Self> {
        let d = w0.rows();
        if !w0.is_square() || d == 0 {
            return Err(Error::dims("nonempty square W0", w0.cols()));
        }
        if families.len() != d {
            return Err(Error::dims(alloc::format!("{d} source families"), families.len()));
        }
        if families.iter().any(|f| matches!(f.kind(), crate::distributions::FamilyKind::Mixed)) {
            return Err(Error::invalid("the mixed benchmark family has no fixed per-source law"));
        }
        let canon = canonical_representative(w0);
        let mut used = alloc::vec![false; d];
        let mut ordered = Vec::with_capacity(d);
        for r in 0..d {
            let row = canon.row(r);
            let src = (0..d)
                .find(|&i| {
                    !used[i] && {
                        let orig = w0.row(i);
                        orig == row || orig.iter().zip(row).all(|(a, b)| *a == -*b)
                    }
                })
                .expect("canonical rows are signed copies of the input rows");
            used[src] = true;
            ordered.push(families[src]);
        }
        let a0 = inverse(&canon)?;
        Ok(NoiselessModel { families: ordered, w0: canon, a0 })
    }

    /// `d` copies of `family` with `W0 = A⁻¹` for a well-conditioned Gaussian
    /// `A` drawn from `seed`.
    pub fn seeded(family: SourceFamily, d: usize, seed: u64) -> Result<Self> {
        let a = well_conditioned_mixing(d, &mut RngStream::new(seed, 0))?;
        Self::new(alloc::vec![family; d], &inverse(&a)?)
    }

    pub fn d(&self) -> usize {
        self.w0.rows()
    }

    /// Parameter dimension `d²`.
    pub fn p(&self) -> usize {
        self.d() * self.d()
    }

    pub fn families(&self) -> &[SourceFamily] {
        &self.families
    }

    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn theta0(&self) -> Vec<f64> {
        self.w0.to_vec()
    }

    /// Whether every family has a `C³` log density (Laplace does not).
    pub fn is_smooth(&self) -> bool {
        self.families.iter().all(SourceFamily::is_smooth)
    }

    /// `n × d` independent source draws.
    pub fn sample_sources(&self, n: usize, rng: &mut RngStream) -> Matrix {
        let d = self.d();
        Matrix::from_fn(n, d, |_, k| self.families[k].sample_one(rng))
    }

    /// `n` observations `x = A₀ s`, one per row.
    pub fn simulate(&self, n: usize, rng: &mut RngStream) -> Matrix {
        self.sample_sources(n, rng).matmul_t(&self.a0)
    }
}

/// `W(θ)` for a row-major `θ`.
pub fn theta_to_matrix(theta: &[f64], d: usize) -> Result<Matrix> {
    Matrix::new(d, d, theta.to_vec())
}

fn check_w(w: &Matrix, model: &NoiselessModel) -> Result<()> {
    if w.shape() != (model.d(), model.d()) {
        return Err(Error::dims(alloc::format!("{0}x{0} W", model.d()), w.rows()));
    }
    Ok(())
}

/// `Σ_n Σ_k log p_k(w_kᵀx⁽ⁿ⁾)`.
pub(crate) fn source_log_sum(w: &Matrix, x: &Matrix, families: &[SourceFamily]) -> f64 {
    let mut total = 0.0;
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (k, fam) in families.iter().enumerate() {
            total += fam.log_density(dot(w.row(k), xr));
        }
    }
    total
}

/// `L_N(W) = Σ_n [log|det W| + Σ_k log p_k(w_kᵀx⁽ⁿ⁾)]`.
pub fn loglik_noiseless(w: &Matrix, x: &Matrix, model: &NoiselessModel) -> Result<f64> {
    check_w(w, model)?;
    if x.cols() != model.d() {
        return Err(Error::dims(alloc::format!("{} columns in X", model.d()), x.cols()));
    }
    let lu = Lu::factor(w)?;
    Ok(x.rows() as f64 * lu.log_abs_det() + source_log_sum(w, x, &model.families))
}

/// Writes `vec(W⁻ᵀ + ψ(Wx)xᵀ)` into `out` given `W⁻¹`.
fn score_into(w: &Matrix, w_inv: &Matrix, x: &[f64], families: &[SourceFamily], out: &mut [f64]) {
    let d = w.rows();
    for i in 0..d {
        let psi = families[i].score().psi(dot(w.row(i), x));
        for j in 0..d {
            out[i * d + j] = w_inv[(j, i)] + psi * x[j];
        }
    }
}

/// Per-sample score `∇_θ ℓ(W; x)`.
pub fn score_theta(w: &Matrix, x: &[f64], model: &NoiselessModel) -> Result<Vec<f64>> {
    check_w(w, model)?;
    let w_inv = inverse(w)?;
    let mut out = alloc::vec![0.0; model.p()];
    score_into(w, &w_inv, x, &model.families, &mut out);
    Ok(out)
}

/// `−∂² log|det W|`, the constant part of the negative Hessian.
fn logdet_curvature(w_inv: &Matrix) -> Matrix {
    let d = w_inv.rows();
    Matrix::from_fn(d * d, d * d, |a, b| {
        let (i, j) = (a / d, a % d);
        let (k, l) = (b / d, b % d);
        w_inv[(l, i)] * w_inv[(j, k)]
    })
}

/// Per-sample Hessian `∇²_θ ℓ(W; x)`.
pub fn hessian_theta(w: &Matrix, x: &[f64], model: &NoiselessModel) -> Result<Matrix> {
    check_w(w, model)?;
    let d = model.d();
    let mut h = logdet_curvature(&inverse(w)?).scale(-1.0);
    for i in 0..d {
        let dpsi = model.families[i].score().psi_prime(dot(w.row(i), x));
        for j in 0..d {
            for l in 0..d {
                h[(i * d + j, i * d + l)] += dpsi * x[j] * x[l];
            }
        }
    }
    Ok(h)
}

/// Monte Carlo check of `E[ψ(S)Sᵀ] = −I` and `E U(W₀; X) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IbpReport {
    pub draws: usize,
    /// Estimate of `E[ψ(S)Sᵀ]`, entry `(k, l)` is `E[ψ_k(S_k) S_l]`.
    pub moment: Matrix,
    pub moment_se: Matrix,
    /// Largest `|E[ψ(S)Sᵀ] + I|` in standard errors.
    pub moment_max_z: f64,
    /// Estimate of `E U(W₀; X)` in `θ` order.
    pub score_mean: Vec<f64>,
    pub score_se: Vec<f64>,
    pub score_max_z: f64,
    pub pass: bool,
    /// `false` when some family is not `C³` (Laplace); the identities still
    /// hold with the score defined almost everywhere.
    pub smooth: bool,
}

fn moment_estimate(sum: f64, sum_sq: f64, n: f64) -> McEstimate {
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate { mean, se: libm::sqrt(var / n) }
}

pub fn check_ibp(model: &NoiselessModel, mc_draws: usize, rng: &mut RngStream) -> Result<IbpReport> {
    if mc_draws < MIN_MC_DRAWS {
        return Err(Error::InsufficientSamples { have: mc_draws, need: MIN_MC_DRAWS });
    }
    let d = model.d();
    let p = model.p();
    let w_inv = model.a0();
    let mut m_sum = alloc::vec![0.0; p];
    let mut m_sq = alloc::vec![0.0; p];
    let mut u_sum = alloc::vec![0.0; p];
    let mut u_sq = alloc::vec![0.0; p];
    let mut u = alloc::vec![0.0; p];
    let mut x = alloc::vec![0.0; d];
    let mut s = alloc::vec![0.0; d];
    for _ in 0..mc_draws {
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = model.families[k].sample_one(rng);
        }
        for (r, xr) in x.iter_mut().enumerate() {
            *xr = dot(model.a0.row(r), &s);
        }
        for k in 0..d {
            let psi = model.families[k].score().psi(s[k]);
            for l in 0..d {
                let v = psi * s[l];
                m_sum[k * d + l] += v;
                m_sq[k * d + l] += v * v;
            }
        }
        score_into(&model.w0, w_inv, &x, &model.families, &mut u);
        for ((acc, sq), v) in u_sum.iter_mut().zip(u_sq.iter_mut()).zip(&u) {
            *acc += v;
            *sq += v * v;
        }
    }
    let n = mc_draws as f64;
    let moments: Vec<McEstimate> = (0..p).map(|a| moment_estimate(m_sum[a], m_sq[a], n)).collect();
    let scores: Vec<McEstimate> = (0..p).map(|a| moment_estimate(u_sum[a], u_sq[a], n)).collect();
    let moment_max_z = moments
        .iter()
        .enumerate()
        .map(|(a, e)| e.z_score(if a / d == a % d { -1.0 } else { 0.0 }))
        .fold(0.0, f64::max);
    let score_max_z = scores.iter().map(|e| e.z_score(0.0)).fold(0.0, f64::max);
    Ok(IbpReport {
        draws: mc_draws,
        moment: Matrix::from_fn(d, d, |k, l| moments[k * d + l].mean),
        moment_se: Matrix::from_fn(d, d, |k, l| moments[k * d + l].se),
        moment_max_z,
        score_mean: scores.iter().map(|e| e.mean).collect(),
        score_se: scores.iter().map(|e| e.se).collect(),
        score_max_z,
        pass: moment_max_z <= Z_THRESHOLD && score_max_z <= Z_THRESHOLD,
        smooth: model.is_smooth(),
    })
}

/// Monte Carlo Fisher information `𝓘 = −E[∇²_θ ℓ(W₀; X)]` over `θ = vec(W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherInfo {
    /// Hessian-based estimate, symmetrized.
    pub matrix: Matrix,
    /// Score outer-product estimate `E[UUᵀ]`, symmetrized.
    pub outer_product: Matrix,
    pub mc_draws: usize,
    /// Per-entry standard errors of `matrix`.
    pub standard_error: Matrix,
    /// Largest entry of `standard_error`.
    pub standard_error_scale: f64,
    /// Largest `|matrix − outer_product|` entry in standard errors of the
    /// per-draw difference.
    pub equality_max_z: f64,
}

impl FisherInfo {
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(SymmetricEigen::new(&self.matrix)?.values[0])
    }

    pub fn inverse(&self) -> Result<Matrix> {
        Ok(inverse(&self.matrix)?.symmetrize())
    }

    /// Information equality holds within [`Z_THRESHOLD`] standard errors.
    pub fn equality_holds(&self) -> bool {
        self.equality_max_z <= Z_THRESHOLD
    }
}

pub fn fisher_info_mc(model: &NoiselessModel, mc_draws: usize, rng: &mut RngStream) -> Result<FisherInfo> {
    if mc_draws < MIN_MC_DRAWS {
        return Err(Error::InsufficientSamples { have: mc_draws, need: MIN_MC_DRAWS });
    }
    let d = model.d();
    let p = model.p();
    let w0 = &model.w0;
    let w_inv = &model.a0;
    let base = logdet_curvature(w_inv);
    let cells = p * p;
    let mut h_sum = alloc::vec![0.0; cells];
    let mut h_sq = alloc::vec![0.0; cells];
    let mut o_sum = alloc::vec![0.0; cells];
    let mut diff_sum = alloc::vec![0.0; cells];
    let mut diff_sq = alloc::vec![0.0; cells];
    let mut u = alloc::vec![0.0; p];
    let mut s = alloc::vec![0.0; d];
    let mut x = alloc::vec![0.0; d];
    let mut dpsi = alloc::vec![0.0; d];
    for _ in 0..mc_draws {
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = model.families[k].sample_one(rng);
        }
        for (r, xr) in x.iter_mut().enumerate() {
            *xr = dot(model.a0.row(r), &s);
        }
        for k in 0..d {
            dpsi[k] = model.families[k].score().psi_prime(s[k]);
        }
        score_into(w0, w_inv, &x, &model.families, &mut u);
        for a in 0..p {
            let (i, j) = (a / d, a % d);
            for b in 0..p {
                let (k, l) = (b / d, b % d);
                let mut neg_h = base[(a, b)];
                if i == k {
                    neg_h -= dpsi[i] * x[j] * x[l];
                }
                let outer = u[a] * u[b];
                let c = a * p + b;
                h_sum[c] += neg_h;
                h_sq[c] += neg_h * neg_h;
                o_sum[c] += outer;
                let diff = neg_h - outer;
                diff_sum[c] += diff;
                diff_sq[c] += diff * diff;
            }
        }
    }
    let n = mc_draws as f64;
    let h: Vec<McEstimate> = (0..cells).map(|c| moment_estimate(h_sum[c], h_sq[c], n)).collect();
    let equality_max_z =
        (0..cells).map(|c| moment_estimate(diff_sum[c], diff_sq[c], n).z_score(0.0)).fold(0.0, f64::max);
    let standard_error = Matrix::from_fn(p, p, |a, b| h[a * p + b].se);
    Ok(FisherInfo {
        matrix: Matrix::from_fn(p, p, |a, b| h[a * p + b].mean).symmetrize(),
        outer_product: Matrix::from_fn(p, p, |a, b| o_sum[a * p + b] / n).symmetrize(),
        mc_draws,
        standard_error_scale: standard_error.max_abs(),
        standard_error,
        equality_max_z,
    })
}
