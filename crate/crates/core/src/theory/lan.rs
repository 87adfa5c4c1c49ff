//! Remainder of the local quadratic expansion
//!
//! ```text
//! r_N(h) = [L_N(θ₀ + h/√N) − L_N(θ₀)] − [hᵀS_N − ½hᵀ𝓘h],   S_N = N^{-1/2} Σ_n ∇ℓ(θ₀; x⁽ⁿ⁾),
//! ```
//!
//! which should shrink like `‖h‖³/√N`.

use alloc::vec::Vec;

use super::{score_into, source_log_sum, NoiselessModel};
use crate::error::{Error, Result};
use crate::numerics::{dot, Lu, Matrix, RngStream};
use crate::stats::{log_log_slope, median};

/// Remainder for the dataset `x`. `fisher` is `𝓘` over `θ = vec(W)`.
pub fn lan_remainder_on(x: &Matrix, model: &NoiselessModel, h: &[f64], fisher: &Matrix) -> Result<f64> {
    let p = model.p();
    if h.len() != p {
        return Err(Error::dims(alloc::format!("h of length {p}"), h.len()));
    }
    if fisher.shape() != (p, p) {
        return Err(Error::dims(alloc::format!("{p}x{p} information matrix"), fisher.rows()));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    if h.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let root_n = libm::sqrt(n as f64);
    let w0 = model.w0();
    let w1 = Matrix::from_fn(model.d(), model.d(), |i, j| w0[(i, j)] + h[i * model.d() + j] / root_n);
    let lu1 = Lu::factor(&w1)?;
    let lu0 = Lu::factor(w0)?;

    // The two log-likelihoods are each O(N); differencing per term keeps the
    // O(1) change accurate.
    let delta_l = n as f64 * (lu1.log_abs_det() - lu0.log_abs_det())
        + (source_log_sum(&w1, x, model.families()) - source_log_sum(w0, x, model.families()));

    let mut s_n = alloc::vec![0.0; p];
    let mut u = alloc::vec![0.0; p];
    for r in 0..n {
        score_into(w0, model.a0(), x.row(r), model.families(), &mut u);
        for (acc, v) in s_n.iter_mut().zip(&u) {
            *acc += v;
        }
    }
    let linear = dot(h, &s_n) / root_n;
    let quadratic = 0.5 * dot(h, &fisher.mat_vec(h));
    Ok(delta_l - (linear - quadratic))
}

/// Remainder for a fresh dataset of size `n`.
pub fn lan_remainder(
    model: &NoiselessModel,
    n: usize,
    h: &[f64],
    fisher: &Matrix,
    rng: &mut RngStream,
) -> Result<f64> {
    let x = model.simulate(n, rng);
    lan_remainder_on(&x, model, h, fisher)
}

/// Uniform direction on the sphere of radius `norm` in `R^p`.
pub fn random_direction(p: usize, norm: f64, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
        let len = libm::sqrt(dot(&v, &v));
        if len > 1e-12 {
            return v.into_iter().map(|c| c * norm / len).collect();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanConfig {
    pub ns: Vec<usize>,
    pub reps: usize,
    /// `‖h‖`; each replicate draws a fresh direction.
    pub h_norm: f64,
    /// Largest admissible `‖h‖`.
    pub radius: f64,
    pub seed: u64,
}

impl LanConfig {
    pub fn new(seed: u64) -> Self {
        LanConfig { ns: alloc::vec![250, 1000, 4000], reps: 50, h_norm: 3.0, radius: 5.0, seed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanPoint {
    pub n: usize,
    pub remainders: Vec<f64>,
    pub median_abs: f64,
    /// Replicates dropped because `W(θ₀ + h/√N)` was singular.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanReport {
    pub points: Vec<LanPoint>,
    /// Log-log slope of the median `|r_N|` against `N`.
    pub slope: f64,
}

/// Replicate `rep` at sample-size index `k` uses stream `child(k·reps + rep)`
/// of `(seed, 0)`, for both the data and the direction.
pub fn lan_study(model: &NoiselessModel, fisher: &Matrix, cfg: &LanConfig) -> Result<LanReport> {
    if cfg.ns.len() < 2 || cfg.reps == 0 {
        return Err(Error::invalid("need at least two sample sizes and one replicate"));
    }
    if !(cfg.h_norm >= 0.0 && cfg.h_norm <= cfg.radius) {
        return Err(Error::invalid(alloc::format!("|h| = {} outside [0, {}]", cfg.h_norm, cfg.radius)));
    }
    let root = RngStream::new(cfg.seed, 0);
    let mut points = Vec::with_capacity(cfg.ns.len());
    for (k, &n) in cfg.ns.iter().enumerate() {
        let mut remainders = Vec::with_capacity(cfg.reps);
        let mut skipped = 0;
        for rep in 0..cfg.reps {
            let mut rng = root.child((k * cfg.reps + rep) as u64);
            let h = random_direction(model.p(), cfg.h_norm, &mut rng);
            match lan_remainder(model, n, &h, fisher, &mut rng) {
                Ok(r) => remainders.push(r),
                Err(Error::SingularMatrix { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if remainders.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let abs: Vec<f64> = remainders.iter().map(|r| r.abs()).collect();
        points.push(LanPoint { n, median_abs: median(&abs), remainders, skipped });
    }
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let meds: Vec<f64> = points.iter().map(|p| p.median_abs).collect();
    Ok(LanReport { slope: log_log_slope(&ns, &meds), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SourceFamily;

    #[test]
    fn zero_direction_gives_zero_remainder() {
        let model = NoiselessModel::seeded(SourceFamily::sech(), 2, 3).unwrap();
        let fisher = Matrix::identity(4);
        for n in [1, 10, 500] {
            let r = lan_remainder(&model, n, &[0.0; 4], &fisher, &mut RngStream::new(n as u64, 0)).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn remainder_equals_expansion_error_in_one_dimension() {
        // d = 1, sech: L(w) = N log|w| + Σ log p(w x), compared by hand.
        let fam = SourceFamily::sech();
        let model = NoiselessModel::new(alloc::vec![fam], &Matrix::identity(1)).unwrap();
        let x = Matrix::from_rows(&[&[0.3], &[-1.2], &[2.0], &[0.05]]).unwrap();
        let h = 0.7;
        let info = 1.3;
        let w1 = 1.0 + h / 2.0;
        let l = |w: f64| (0..4).map(|r| libm::log(w) + fam.log_density(w * x[(r, 0)])).sum::<f64>();
        let s_n: f64 = (0..4).map(|r| 1.0 + fam.score().psi(x[(r, 0)]) * x[(r, 0)]).sum::<f64>() / 2.0;
        let expected = (l(w1) - l(1.0)) - (h * s_n - 0.5 * info * h * h);
        let got = lan_remainder_on(&x, &model, &[h], &Matrix::from_rows(&[&[info]]).unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn directions_have_requested_norm() {
        let mut rng = RngStream::new(9, 0);
        let v = random_direction(4, 3.0, &mut rng);
        assert!((dot(&v, &v) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_h() {
        let model = NoiselessModel::seeded(SourceFamily::sech(), 2, 3).unwrap();
        let mut cfg = LanConfig::new(0);
        cfg.h_norm = 6.0;
        assert!(lan_study(&model, &Matrix::identity(4), &cfg).is_err());
    }
}
