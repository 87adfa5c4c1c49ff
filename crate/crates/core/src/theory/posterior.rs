//! Random-walk Metropolis on `θ = vec(W)` for the noiseless model under an
//! isotropic Gaussian prior, and the Bernstein–von Mises comparisons built on
//! its draws.
//!
//! The proposal is `θ' = θ + λ·L·z` with `z ~ N(0, I)`. During burn-in `λ` is
//! tuned toward the target acceptance rate by a Robbins–Monro step on
//! `log λ`, and `L` is replaced twice by the Cholesky factor of the empirical
//! covariance of the preceding burn-in window. Proposals with singular
//! `W(θ)` are rejected.

use alloc::vec::Vec;

use super::{fisher_info_mc, source_log_sum, theta_to_matrix, FisherInfo, NoiselessModel};
use crate::error::{Error, Result};
use crate::metrics::signed_perm_distance;
use crate::numerics::{Cholesky, Lu, Matrix, RngStream};
use crate::stats::{effective_sample_size, ks_critical, ks_one_sample, log_log_slope, mean, normal_cdf, quantile};

/// Minimum effective sample size (smallest over coordinates) for a report.
pub const MIN_ESS: f64 = 200.0;

/// Significance level of the per-coordinate normality tests.
pub const KS_ALPHA: f64 = 0.01;

/// `L_N(θ) − ‖θ − center‖² / (2 prior_sd²)`, or `None` when `W(θ)` is singular.
pub fn log_posterior(theta: &[f64], x: &Matrix, model: &NoiselessModel, center: &[f64], prior_sd: f64) -> Option<f64> {
    let w = theta_to_matrix(theta, model.d()).ok()?;
    let lu = Lu::factor(&w).ok()?;
    let prior: f64 = theta.iter().zip(center).map(|(t, c)| (t - c) * (t - c)).sum::<f64>();
    let lp = x.rows() as f64 * lu.log_abs_det() + source_log_sum(&w, x, model.families())
        - 0.5 * prior / (prior_sd * prior_sd);
    lp.is_finite().then_some(lp)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RwmConfig {
    /// Total iterations including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_sd: f64,
    /// Multiplier on the initial proposal scale `2.38/√p · min(prior_sd, N^{-1/2})`.
    pub step_scale: f64,
    pub target_acceptance: f64,
}

impl RwmConfig {
    pub fn new(iterations: usize, burn_in: usize) -> Self {
        RwmConfig { iterations, burn_in, prior_sd: 100.0, step_scale: 1.0, target_acceptance: 0.234 }
    }

    fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(alloc::format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in,
                self.iterations
            )));
        }
        if !(self.prior_sd > 0.0 && self.prior_sd.is_finite()) {
            return Err(Error::invalid("prior_sd must be positive"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::invalid("step_scale must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::invalid("target acceptance must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RwmTrace {
    /// Post-burn-in draws of `θ`, one per row.
    pub draws: Matrix,
    /// Log posterior after every iteration, burn-in included.
    pub log_posterior: Vec<f64>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Final proposal multiplier `λ`.
    pub step_scale: f64,
    pub prior_center: Vec<f64>,
    /// Number of observations the posterior conditions on.
    pub n_obs: usize,
}

impl RwmTrace {
    pub fn posterior_mean(&self) -> Vec<f64> {
        (0..self.draws.cols()).map(|j| mean(&self.draws.col(j))).collect()
    }

    /// Sample covariance of the draws.
    pub fn posterior_cov(&self) -> Matrix {
        empirical_cov(self.draws.data(), self.draws.cols())
    }
}

fn empirical_cov(rows: &[f64], p: usize) -> Matrix {
    let n = rows.len() / p;
    let mut m = alloc::vec![0.0; p];
    for r in rows.chunks_exact(p) {
        for (acc, v) in m.iter_mut().zip(r) {
            *acc += v / n as f64;
        }
    }
    let mut cov = Matrix::zeros(p, p);
    for r in rows.chunks_exact(p) {
        for a in 0..p {
            for b in 0..p {
                cov[(a, b)] += (r[a] - m[a]) * (r[b] - m[b]);
            }
        }
    }
    cov.scale(1.0 / (n as f64 - 1.0))
}

/// Chain started at `start`; the prior is centred there too.
pub fn rwm_posterior(
    x: &Matrix,
    model: &NoiselessModel,
    start: &Matrix,
    cfg: &RwmConfig,
    rng: &mut RngStream,
) -> Result<RwmTrace> {
    cfg.validate()?;
    let d = model.d();
    let p = model.p();
    if x.cols() != d {
        return Err(Error::dims(alloc::format!("{d} columns in X"), x.cols()));
    }
    let center = start.to_vec();
    let mut theta = center.clone();
    let mut lp = log_posterior(&theta, x, model, &center, cfg.prior_sd).ok_or(Error::SingularMatrix { pivot: 0.0 })?;

    let n = x.rows();
    let sd0 = if n == 0 { cfg.prior_sd } else { cfg.prior_sd.min(1.0 / libm::sqrt(n as f64)) };
    let base = 2.38 / libm::sqrt(p as f64) * cfg.step_scale;
    let mut chol = Matrix::identity(p).scale(sd0);
    let mut log_lambda = libm::log(base);
    let mut since_reset = 0usize;

    let quarter = cfg.burn_in / 4;
    let adapt_cov = quarter >= 10 * p;
    let mut window: Vec<f64> = Vec::new();

    let kept = cfg.iterations - cfg.burn_in;
    let mut draws = Vec::with_capacity(kept * p);
    let mut log_posterior_trace = Vec::with_capacity(cfg.iterations);
    let mut accepted_after = 0usize;
    let mut z = alloc::vec![0.0; p];
    let mut proposal = alloc::vec![0.0; p];

    for m in 0..cfg.iterations {
        let lambda = libm::exp(log_lambda);
        for zi in z.iter_mut() {
            *zi = rng.standard_normal();
        }
        let step = chol.mat_vec(&z);
        for ((prop, t), s) in proposal.iter_mut().zip(&theta).zip(&step) {
            *prop = t + lambda * s;
        }
        let u = rng.uniform01();
        let accepted = match log_posterior(&proposal, x, model, &center, cfg.prior_sd) {
            Some(lp_new) if libm::log(u) < lp_new - lp => {
                theta.copy_from_slice(&proposal);
                lp = lp_new;
                true
            }
            _ => false,
        };
        log_posterior_trace.push(lp);

        if m < cfg.burn_in {
            since_reset += 1;
            let gain = 0.5 / libm::pow(since_reset as f64, 0.6);
            let a = if accepted { 1.0 } else { 0.0 };
            log_lambda += gain * (a - cfg.target_acceptance);
            if adapt_cov && m >= quarter && m < 3 * quarter {
                window.extend_from_slice(&theta);
            }
            if adapt_cov && (m + 1 == 2 * quarter || m + 1 == 3 * quarter) {
                let mut cov = empirical_cov(&window, p);
                cov.add_diag(1e-12 * (0..p).map(|i| cov[(i, i)]).sum::<f64>().max(f64::MIN_POSITIVE));
                if let Ok(c) = Cholesky::factor(&cov) {
                    chol = c.lower().clone();
                    log_lambda = libm::log(base);
                    since_reset = 0;
                }
                window.clear();
            }
        } else {
            if accepted {
                accepted_after += 1;
            }
            draws.extend_from_slice(&theta);
        }
    }
    Ok(RwmTrace {
        draws: Matrix::new(kept, p, draws)?,
        log_posterior: log_posterior_trace,
        acceptance_rate: accepted_after as f64 / kept as f64,
        step_scale: libm::exp(log_lambda),
        prior_center: center,
        n_obs: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvmReport {
    pub n: usize,
    pub draws: usize,
    pub acceptance_rate: f64,
    /// Smallest per-coordinate effective sample size.
    pub ess_min: f64,
    /// `N ×` posterior covariance of `θ`.
    pub scaled_cov: Matrix,
    /// `𝓘⁻¹`.
    pub reference: Matrix,
    /// `|N·Var(θ_a) − (𝓘⁻¹)_aa| / (𝓘⁻¹)_aa` per coordinate.
    pub rel_err_diag: Vec<f64>,
    pub max_rel_err: f64,
    /// KS statistics of the standardized marginals after thinning to roughly
    /// independent draws.
    pub ks_statistics: Vec<f64>,
    pub ks_critical: f64,
    pub ks_thin: usize,
    /// Posterior median and 90th percentile of `d±(W, W₀)`.
    pub dpm_median: f64,
    pub dpm_q90: f64,
}

impl BvmReport {
    pub fn ks_pass(&self) -> bool {
        self.ks_statistics.iter().all(|k| *k <= self.ks_critical)
    }
}

pub fn bvm_report(trace: &RwmTrace, model: &NoiselessModel, fisher: &FisherInfo, n: usize) -> Result<BvmReport> {
    let p = model.p();
    let draws = &trace.draws;
    if draws.cols() != p || fisher.matrix.rows() != p {
        return Err(Error::dims(alloc::format!("{p} parameters"), draws.cols()));
    }
    let columns: Vec<Vec<f64>> = (0..p).map(|a| draws.col(a)).collect();
    let ess_min = columns.iter().map(|c| effective_sample_size(c)).fold(f64::INFINITY, f64::min);
    if !(ess_min >= MIN_ESS) {
        return Err(Error::InsufficientSamples { have: ess_min as usize, need: MIN_ESS as usize });
    }
    let scaled_cov = trace.posterior_cov().symmetrize().scale(n as f64);
    let reference = fisher.inverse()?;
    let rel_err_diag: Vec<f64> =
        (0..p).map(|a| (scaled_cov[(a, a)] - reference[(a, a)]).abs() / reference[(a, a)]).collect();
    let max_rel_err = rel_err_diag.iter().copied().fold(0.0, f64::max);

    let ks_thin = ((draws.rows() as f64 / ess_min).ceil() as usize).max(1);
    let mut ks_statistics = Vec::with_capacity(p);
    let mut thinned_len = 0;
    for col in &columns {
        let m = mean(col);
        let sd = libm::sqrt(crate::stats::variance(col));
        let z: Vec<f64> = col.iter().step_by(ks_thin).map(|v| (v - m) / sd).collect();
        thinned_len = z.len();
        ks_statistics.push(ks_one_sample(&z, normal_cdf).statistic);
    }

    let dpm: Vec<f64> = (0..draws.rows())
        .map(|r| {
            let w = theta_to_matrix(draws.row(r), model.d()).expect("row length is d²");
            signed_perm_distance(&w, model.w0())
        })
        .collect();

    Ok(BvmReport {
        n,
        draws: draws.rows(),
        acceptance_rate: trace.acceptance_rate,
        ess_min,
        scaled_cov,
        reference,
        rel_err_diag,
        max_rel_err,
        ks_statistics,
        ks_critical: ks_critical(thinned_len, KS_ALPHA),
        ks_thin,
        dpm_median: quantile(&dpm, 0.5),
        dpm_q90: quantile(&dpm, 0.9),
    })
}

/// Log-log slope of the posterior 90th percentile of `d±` against `N`.
pub fn contraction_slope(reports: &[BvmReport]) -> f64 {
    let ns: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let q: Vec<f64> = reports.iter().map(|r| r.dpm_q90).collect();
    log_log_slope(&ns, &q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvmStudyConfig {
    pub ns: Vec<usize>,
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_sd: f64,
    pub fisher_draws: usize,
    pub seed: u64,
}

impl BvmStudyConfig {
    pub fn new(seed: u64) -> Self {
        BvmStudyConfig {
            ns: alloc::vec![500, 2000, 8000],
            iterations: 200_000,
            burn_in: 40_000,
            prior_sd: 100.0,
            fisher_draws: 100_000,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvmStudy {
    pub fisher: FisherInfo,
    /// One report per sample size, in the order of `ns`.
    pub reports: Vec<BvmReport>,
    pub contraction_slope: f64,
}

/// Streams of `(seed, 0)`: child 0 for the information estimate, children
/// `1 + 2k` and `2 + 2k` for the data and chain at the `k`-th sample size.
/// Every chain starts at `W₀`.
pub fn bvm_study(model: &NoiselessModel, cfg: &BvmStudyConfig) -> Result<BvmStudy> {
    if cfg.ns.is_empty() {
        return Err(Error::invalid("no sample sizes given"));
    }
    let root = RngStream::new(cfg.seed, 0);
    let fisher = fisher_info_mc(model, cfg.fisher_draws, &mut root.child(0))?;
    let rwm = RwmConfig { prior_sd: cfg.prior_sd, ..RwmConfig::new(cfg.iterations, cfg.burn_in) };
    let mut reports = Vec::with_capacity(cfg.ns.len());
    for (k, &n) in cfg.ns.iter().enumerate() {
        let x = model.simulate(n, &mut root.child(1 + 2 * k as u64));
        let trace = rwm_posterior(&x, model, model.w0(), &rwm, &mut root.child(2 + 2 * k as u64))?;
        reports.push(bvm_report(&trace, model, &fisher, n)?);
    }
    let contraction_slope = if reports.len() >= 2 { contraction_slope(&reports) } else { f64::NAN };
    Ok(BvmStudy { fisher, reports, contraction_slope })
}
