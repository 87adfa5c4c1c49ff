//! Gibbs sampler for Student-t sources written as Gaussian scale mixtures,
//!
//! ```text
//! s_ij | v_ij ~ N(0, v_ij),   v_ij ~ IG(α_j/2, scale α_j λ_j²/2),
//! ```
//!
//! with a flat prior on `A` and `p(σ²) ∝ 1/σ²` (optionally an inverse-gamma
//! prior). A sweep draws sources, mixing matrix, noise variance and local
//! scales in that order:
//!
//! - `s_i ~ N(μ, Σ)` with `Σ = (σ⁻²AᵀA + diag(v_i)⁻¹)⁻¹`, `μ = σ⁻²ΣAᵀx_i`;
//! - rows of `A` ~ `N((SᵀS)⁻¹Sᵀx_·k, σ²(SᵀS)⁻¹)`;
//! - `σ² ~ IG(dN/2 + a₀, scale ‖X − SAᵀ‖²/2 + b₀)`;
//! - `v_ij ~ IG((α_j + 1)/2, scale (s_ij² + α_j λ_j²)/2)`.
//!
//! `λ` and `α` stay fixed; no hyperprior is placed on them.
//!
//! The noise level starts at `sigma_init` and is updated every sweep, so a
//! generous start anneals naturally as the residuals shrink.

use alloc::vec::Vec;

use super::{update_mixing, update_sources, validate_schedule, Trace, TraceConfig};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct StudentTGibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Degrees of freedom per source; a single value applies to all.
    pub alpha: Vec<f64>,
    /// Scale per source; a single value applies to all.
    pub lambda: Vec<f64>,
    /// Starting noise standard deviation.
    pub sigma_init: f64,
    /// Inverse-gamma prior `(shape, scale)` on `σ²`; `(0, 0)` is `1/σ²`.
    pub noise_prior: (f64, f64),
    pub keep_sources: bool,
}

impl StudentTGibbsConfig {
    pub fn new(alpha: f64, lambda: f64, seed: u64) -> Self {
        StudentTGibbsConfig {
            iterations: 4000,
            burn_in: 2000,
            thin: 5,
            seed,
            alpha: alloc::vec![alpha],
            lambda: alloc::vec![lambda],
            sigma_init: 1.0,
            noise_prior: (0.0, 0.0),
            keep_sources: false,
        }
    }

    fn per_source(values: &[f64], d: usize, name: &str) -> Result<Vec<f64>> {
        let out = match values.len() {
            1 => alloc::vec![values[0]; d],
            len if len == d => values.to_vec(),
            len => return Err(Error::dims(alloc::format!("{name} of length 1 or {d}"), len)),
        };
        if out.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(alloc::format!("{name} must be positive")));
        }
        Ok(out)
    }

    /// Shape of the noise-variance conditional, `dN/2 + a₀`.
    pub fn noise_shape(&self, n: usize, d: usize) -> f64 {
        0.5 * (n * d) as f64 + self.noise_prior.0
    }
}

/// Student-t log density with `alpha` degrees of freedom and scale `lambda`.
pub fn t_log_density(s: f64, alpha: f64, lambda: f64) -> f64 {
    let z = s / lambda;
    libm::lgamma(0.5 * (alpha + 1.0))
        - libm::lgamma(0.5 * alpha)
        - 0.5 * libm::log(alpha * core::f64::consts::PI)
        - libm::log(lambda)
        - 0.5 * (alpha + 1.0) * libm::log1p(z * z / alpha)
}

fn residual_ss(x: &Matrix, s: &Matrix, a: &Matrix) -> f64 {
    (x - &s.matmul_t(a)).data().iter().map(|r| r * r).sum()
}

pub fn run_student_t_gibbs(x: &Matrix, cfg: &StudentTGibbsConfig) -> Result<Trace> {
    validate_schedule(cfg.iterations, cfg.burn_in, cfg.thin)?;
    let (n, d) = x.shape();
    if n <= d {
        return Err(Error::InsufficientSamples { have: n, need: d + 1 });
    }
    let alpha = StudentTGibbsConfig::per_source(&cfg.alpha, d, "alpha")?;
    let lambda = StudentTGibbsConfig::per_source(&cfg.lambda, d, "lambda")?;
    if !(cfg.sigma_init > 0.0 && cfg.sigma_init.is_finite()) {
        return Err(Error::invalid("sigma_init must be positive"));
    }
    let (a0, b0) = cfg.noise_prior;
    if a0 < 0.0 || b0 < 0.0 {
        return Err(Error::invalid("noise prior parameters must be non-negative"));
    }

    let echo = TraceConfig { iterations: cfg.iterations, burn_in: cfg.burn_in, thin: cfg.thin, seed: cfg.seed };
    let mut trace = Trace::new(echo, n, d, cfg.keep_sources);
    let mut rng = RngStream::new(cfg.seed, 0);

    let mut s = x.clone();
    let mut a = Matrix::identity(d);
    let mut sigma = cfg.sigma_init;
    let mut v = Matrix::from_fn(n, d, |_, j| lambda[j] * lambda[j]);
    let noise_shape = cfg.noise_shape(n, d);

    for m in 1..=cfg.iterations {
        let prior_precision = v.map(|vij| 1.0 / vij);
        update_sources(&mut s, &a, &prior_precision, x, sigma, &mut rng)?;
        update_mixing(&mut a, &s, x, sigma, 0.0, &mut rng)?;

        let ssr = residual_ss(x, &s, &a);
        let var = rng.inverse_gamma(noise_shape, 0.5 * ssr + b0)?;
        sigma = libm::sqrt(var);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::non_finite(alloc::format!("noise draw at sweep {m}")));
        }

        for i in 0..n {
            for j in 0..d {
                let sij = s[(i, j)];
                let scale = 0.5 * (sij * sij + alpha[j] * lambda[j] * lambda[j]);
                v[(i, j)] = rng.inverse_gamma(0.5 * (alpha[j] + 1.0), scale)?;
            }
        }

        let lj = log_joint(x, &s, &a, sigma, &alpha, &lambda, ssr);
        trace.log_joint.push(lj);
        if Trace::is_kept(&echo, m) {
            trace.push(m, &a, &s);
            trace.sigma_draws.push(sigma);
        }
    }
    Ok(trace)
}

fn log_joint(x: &Matrix, s: &Matrix, a: &Matrix, sigma: f64, alpha: &[f64], lambda: &[f64], ssr: f64) -> f64 {
    let nobs = x.data().len() as f64;
    let var = sigma * sigma;
    let lik = -0.5 * nobs * libm::log(2.0 * core::f64::consts::PI * var) - 0.5 * ssr / var;
    let d = a.rows();
    let prior: f64 = (0..s.rows())
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| t_log_density(s[(i, j)], alpha[j], lambda[j]))
        .sum();
    lik + prior - libm::log(var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::source_conditional;

    #[test]
    fn noise_shape_bookkeeping() {
        let cfg = StudentTGibbsConfig::new(3.0, 1.0, 0);
        assert_eq!(cfg.noise_shape(500, 4), 1000.0);
    }

    #[test]
    fn infinite_prior_variance_gives_least_squares_covariance() {
        // With diag(v)⁻¹ → 0 the source block becomes N((AᵀA)⁻¹Aᵀx, σ²(AᵀA)⁻¹).
        let a = Matrix::from_rows(&[&[1.0, 0.4], &[0.2, 1.5]]).unwrap();
        let sigma = 0.3;
        let (mean, cov) = source_conditional(&a, &[0.0, 0.0], &[1.0, 2.0], sigma).unwrap();
        let ata_inv = crate::numerics::inverse(&a.t_matmul(&a)).unwrap();
        assert!(cov.max_abs_diff(&ata_inv.scale(sigma * sigma)) < 1e-12);
        let ls = crate::numerics::inverse(&a).unwrap().mat_vec(&[1.0, 2.0]);
        assert!(mean.iter().zip(&ls).all(|(m, l)| (m - l).abs() < 1e-12));
    }

    #[test]
    fn t_density_normalizer() {
        let expected = libm::log(2.0 / (core::f64::consts::PI * libm::sqrt(3.0)));
        assert!((t_log_density(0.0, 3.0, 1.0) - expected).abs() < 1e-14);
        assert!((t_log_density(1.0, 3.0, 2.0) - (t_log_density(0.5, 3.0, 1.0) - libm::log(2.0))).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let x = Matrix::from_fn(20, 2, |i, j| (i * 2 + j) as f64 * 0.1);
        let mut cfg = StudentTGibbsConfig::new(-1.0, 1.0, 0);
        assert!(run_student_t_gibbs(&x, &cfg).is_err());
        cfg.alpha = alloc::vec![3.0, 3.0, 3.0];
        assert!(matches!(run_student_t_gibbs(&x, &cfg), Err(Error::DimensionMismatch { .. })));
    }
}
