//! Gibbs-ICE: the three-block Pólya-Gamma augmented Gibbs sampler for the
//! noisy linear ICA model
//!
//! ```text
//! x_i | s_i, A ~ N(A·s_i, σ²I),   s_ij | τ_ij ~ N(0, 1/(4τ_ij)),   τ_ij ~ PG(1, 0),
//! A_kj ~ N(0, σ₂²),
//! ```
//!
//! whose `s`-marginal is the hyperbolic secant law `sech(s)/π`. One sweep
//! draws every row of `S`, then every row of `A`, then every `τ_ij`.
//!
//! Observations are stored row-wise, `X = S·Aᵀ + E`, so the regression for
//! column `k` of `X` is `x_·k = S·a_k + ε` with `a_k` the `k`-th *row* of `A`.
//! Since the prior on `A` is i.i.d. over entries, this is the same conditional
//! whichever way the blocks are labelled.
//!
//! [`student_t`] holds the inverse-gamma scale-mixture sampler for Student-t
//! sources with an unknown noise level.

pub mod student_t;

use alloc::vec::Vec;

use crate::distributions::{log_cosh, pg_mean, sample_pg1};
use crate::optim::run_em;
use crate::error::{Error, Result};
use crate::numerics::{inverse, Cholesky, Matrix, RngStream};

pub use student_t::{run_student_t_gibbs, StudentTGibbsConfig};

/// Lower bound applied to every PG draw so `D_i` stays finite-conditioned.
pub const TAU_FLOOR: f64 = 1e-12;

/// Initial value of every `τ_ij`: the PG(1, 0) mean.
pub const TAU_INIT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Noise standard deviation (fixed).
    pub sigma: f64,
    /// Prior standard deviation of the entries of `A`.
    pub sigma2: f64,
    pub seed: u64,
    /// Keep every retained `S` draw in the trace, not just the running sum.
    pub keep_sources: bool,
    /// Starting state of the chain.
    pub init: GibbsInit,
    /// Start the chain at this noise level and decrease it geometrically to
    /// `sigma` over the first half of burn-in. `None` runs at `sigma` from
    /// the first sweep.
    pub anneal_from: Option<f64>,
}

impl GibbsConfig {
    /// 4000 sweeps, 2000 burn-in, thinning 5, σ₂ = 1, EM warm start, no annealing.
    pub fn new(sigma: f64, seed: u64) -> Self {
        GibbsConfig {
            iterations: 4000,
            burn_in: 2000,
            thin: 5,
            sigma,
            sigma2: 1.0,
            seed,
            keep_sources: false,
            init: GibbsInit::Em,
            anneal_from: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_schedule(self.iterations, self.burn_in, self.thin)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(alloc::format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(alloc::format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if let Some(s0) = self.anneal_from {
            if !(s0 > 0.0 && s0.is_finite()) {
                return Err(Error::invalid(alloc::format!("anneal_from must be positive, got {s0}")));
            }
        }
        Ok(())
    }

    /// Noise level used for the sweep numbered `m` (1-based).
    pub fn sigma_at(&self, m: usize) -> f64 {
        let Some(s0) = self.anneal_from else { return self.sigma };
        let span = self.burn_in / 2;
        if s0 <= self.sigma || m > span || span == 0 {
            return self.sigma;
        }
        let frac = (m - 1) as f64 / span as f64;
        s0 * libm::pow(self.sigma / s0, frac)
    }
}

pub(crate) fn validate_schedule(iterations: usize, burn_in: usize, thin: usize) -> Result<()> {
    if burn_in >= iterations {
        return Err(Error::invalid(alloc::format!("burn_in ({burn_in}) must be below iterations ({iterations})")));
    }
    if thin == 0 {
        return Err(Error::invalid("thin must be at least 1"));
    }
    Ok(())
}

/// How the chain is started.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GibbsInit {
    /// `A = I`, `S = X`, `T = 1/4`.
    Identity,
    /// `A = Ŵ⁻¹` from EM under the same `1/cosh` source law, `S = X·Ŵᵀ`,
    /// `T` at the PG conditional means given `S`.
    Em,
}

/// EM budget for [`GibbsInit::Em`].
pub const EM_INIT_MAX_ITER: usize = 1000;
pub const EM_INIT_TOL: f64 = 1e-9;

/// One state of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsState {
    pub s: Matrix,
    pub a: Matrix,
    pub t: Matrix,
}

impl GibbsState {
    /// `A = I`, `S = X`, `T = 1/4`.
    pub fn initial(x: &Matrix) -> Self {
        let (n, d) = x.shape();
        GibbsState { s: x.clone(), a: Matrix::identity(d), t: Matrix::filled(n, d, TAU_INIT) }
    }

    /// Warm start from the EM estimate of the unmixing matrix.
    pub fn from_em(x: &Matrix) -> Result<Self> {
        let d = x.cols();
        let w = run_em(x, &Matrix::identity(d), EM_INIT_MAX_ITER, EM_INIT_TOL)?.w;
        Self::from_unmixing(x, &w)
    }

    /// `A = W⁻¹`, `S = X·Wᵀ`, `τ_ij = E[PG(1, |2s_ij|)]`.
    pub fn from_unmixing(x: &Matrix, w: &Matrix) -> Result<Self> {
        let s = x.matmul_t(w);
        let t = s.map(|v| pg_mean(libm::fabs(2.0 * v)).max(TAU_FLOOR));
        Ok(GibbsState { a: inverse(w)?, s, t })
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        let (n, d) = x.shape();
        if self.s.shape() != (n, d) || self.t.shape() != (n, d) || self.a.shape() != (d, d) {
            return Err(Error::dims(
                alloc::format!("S, T {n}x{d} and A {d}x{d}"),
                alloc::format!("S {:?}, T {:?}, A {:?}", self.s.shape(), self.t.shape(), self.a.shape()),
            ));
        }
        if self.t.data().iter().any(|&t| !(t > 0.0)) {
            return Err(Error::invalid("PG scales must be strictly positive"));
        }
        Ok(())
    }
}

/// Schedule and seed echoed into a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

/// Retained draws of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub config: TraceConfig,
    /// Sweep number (1-based) of each retained draw.
    pub kept_iterations: Vec<usize>,
    pub a_draws: Vec<Matrix>,
    /// Retained `S` draws, when requested.
    pub s_draws: Option<Vec<Matrix>>,
    /// Sum of retained `S` draws.
    pub s_sum: Matrix,
    /// Log joint density after every sweep.
    pub log_joint: Vec<f64>,
    /// Noise SD of each retained draw, for samplers that update it.
    pub sigma_draws: Vec<f64>,
}

impl Trace {
    pub fn new(config: TraceConfig, n: usize, d: usize, keep_sources: bool) -> Self {
        Trace {
            config,
            kept_iterations: Vec::new(),
            a_draws: Vec::new(),
            s_draws: keep_sources.then(Vec::new),
            s_sum: Matrix::zeros(n, d),
            log_joint: Vec::with_capacity(config.iterations),
            sigma_draws: Vec::new(),
        }
    }

    /// Expected number of retained draws, `⌊(iterations − burn_in)/thin⌋`.
    pub fn expected_len(config: &TraceConfig) -> usize {
        (config.iterations - config.burn_in) / config.thin
    }

    pub fn is_kept(config: &TraceConfig, m: usize) -> bool {
        m > config.burn_in && (m - config.burn_in).is_multiple_of(config.thin)
    }

    pub fn len(&self) -> usize {
        self.a_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_draws.is_empty()
    }

    pub fn push(&mut self, m: usize, a: &Matrix, s: &Matrix) {
        self.kept_iterations.push(m);
        self.a_draws.push(a.clone());
        self.s_sum.add_scaled(s, 1.0);
        if let Some(draws) = self.s_draws.as_mut() {
            draws.push(s.clone());
        }
    }

    /// Log joint of each retained draw.
    pub fn kept_log_joint(&self) -> Vec<f64> {
        self.kept_iterations.iter().map(|&m| self.log_joint[m - 1]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub a_mean: Matrix,
    /// `inverse(a_mean)`, not the mean of inverses.
    pub w_mean: Matrix,
    pub s_mean: Matrix,
}

pub fn posterior_summary(trace: &Trace) -> Result<PosteriorSummary> {
    let k = trace.len();
    if k == 0 {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    let (d, _) = trace.a_draws[0].shape();
    let mut a_mean = Matrix::zeros(d, d);
    for a in &trace.a_draws {
        a_mean.add_scaled(a, 1.0 / k as f64);
    }
    let w_mean = inverse(&a_mean)?;
    Ok(PosteriorSummary { a_mean, w_mean, s_mean: trace.s_sum.scale(1.0 / k as f64) })
}

/// Mean and covariance of `s_i | A, τ_i, x_i`:
/// precision `σ⁻²AᵀA + diag(4τ_i)`, mean `Σ·σ⁻²Aᵀx_i`.
pub fn source_conditional(a: &Matrix, tau: &[f64], x: &[f64], sigma: f64) -> Result<(Vec<f64>, Matrix)> {
    let prec = source_precision(&a.t_matmul(a).scale(1.0 / (sigma * sigma)), tau);
    let chol = Cholesky::factor(&prec)?;
    let b: Vec<f64> = a.t_mat_vec(x).iter().map(|v| v / (sigma * sigma)).collect();
    Ok((chol.solve_vec(&b), chol.inverse()))
}

/// Mean of every row of `A` (as rows of the returned matrix) and the shared
/// covariance, given `S`: precision `σ⁻²SᵀS + σ₂⁻²I`.
pub fn mixing_conditional(s: &Matrix, x: &Matrix, sigma: f64, sigma2: f64) -> Result<(Matrix, Matrix)> {
    let (chol, rhs) = mixing_factor(s, x, sigma, 1.0 / (sigma2 * sigma2))?;
    let mean = chol.solve(&rhs).transpose();
    Ok((mean, chol.inverse()))
}

fn source_precision(gram: &Matrix, tau: &[f64]) -> Matrix {
    let mut p = gram.clone();
    for (j, &t) in tau.iter().enumerate() {
        p[(j, j)] += 4.0 * t;
    }
    p
}

/// Cholesky factor of the `A`-block precision `σ⁻²SᵀS + prior_precision·I`
/// and the right-hand sides `σ⁻²Sᵀx_·k` as columns.
fn mixing_factor(s: &Matrix, x: &Matrix, sigma: f64, prior_precision: f64) -> Result<(Cholesky, Matrix)> {
    let inv_var = 1.0 / (sigma * sigma);
    let mut prec = s.t_matmul(s).symmetrize().scale(inv_var);
    prec.add_diag(prior_precision);
    let chol = Cholesky::factor_unchecked(&prec)?;
    Ok((chol, s.t_matmul(x).scale(inv_var)))
}

/// `μ + L⁻ᵀz` with `z` standard normal: a draw from `N(μ, (LLᵀ)⁻¹)`.
fn draw_from_precision(chol: &Cholesky, mean: &mut [f64], rng: &mut RngStream) {
    let mut z: Vec<f64> = (0..mean.len()).map(|_| rng.standard_normal()).collect();
    chol.backward_in_place(&mut z);
    mean.iter_mut().zip(&z).for_each(|(m, e)| *m += e);
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::non_finite(alloc::format!("{what} draw")))
    }
}

/// Draws every row of `S` from its conditional.
pub(crate) fn update_sources(
    s: &mut Matrix,
    a: &Matrix,
    prior_precision: &Matrix,
    x: &Matrix,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let inv_var = 1.0 / (sigma * sigma);
    let gram = a.t_matmul(a).symmetrize().scale(inv_var);
    let d = a.rows();
    let mut prec = gram.clone();
    for i in 0..x.rows() {
        for j in 0..d {
            for k in 0..d {
                prec[(j, k)] = gram[(j, k)];
            }
            prec[(j, j)] += prior_precision[(i, j)];
        }
        let chol = Cholesky::factor_unchecked(&prec)?;
        let mut mu: Vec<f64> = a.t_mat_vec(x.row(i)).iter().map(|v| v * inv_var).collect();
        chol.forward_in_place(&mut mu);
        chol.backward_in_place(&mut mu);
        draw_from_precision(&chol, &mut mu, rng);
        s.row_mut(i).copy_from_slice(&mu);
    }
    check_finite(s, "source")
}

/// Draws every row of `A` from its conditional with prior precision
/// `prior_precision·I` (zero for a flat prior).
pub(crate) fn update_mixing(
    a: &mut Matrix,
    s: &Matrix,
    x: &Matrix,
    sigma: f64,
    prior_precision: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let (chol, rhs) = mixing_factor(s, x, sigma, prior_precision)?;
    for k in 0..a.rows() {
        let mut mu = chol.solve_vec(&rhs.col(k));
        draw_from_precision(&chol, &mut mu, rng);
        a.row_mut(k).copy_from_slice(&mu);
    }
    check_finite(a, "mixing")
}

fn update_scales(t: &mut Matrix, s: &Matrix, rng: &mut RngStream) -> Result<()> {
    for (tau, &v) in t.data_mut().iter_mut().zip(s.data()) {
        *tau = sample_pg1(libm::fabs(2.0 * v), rng)?.max(TAU_FLOOR);
    }
    Ok(())
}

/// One full sweep at noise level `sigma`.
pub fn gibbs_ice_step_at(
    state: &mut GibbsState,
    x: &Matrix,
    sigma: f64,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<()> {
    state.check(x)?;
    let prior_precision = state.t.scale(4.0);
    update_sources(&mut state.s, &state.a, &prior_precision, x, sigma, rng)?;
    update_mixing(&mut state.a, &state.s, x, sigma, 1.0 / (sigma2 * sigma2), rng)?;
    update_scales(&mut state.t, &state.s, rng)
}

/// One full sweep at the configured (target) noise level.
pub fn gibbs_ice_step(state: &mut GibbsState, x: &Matrix, cfg: &GibbsConfig, rng: &mut RngStream) -> Result<()> {
    gibbs_ice_step_at(state, x, cfg.sigma, cfg.sigma2, rng)
}

/// `log p(X, S, A)` with the PG scales integrated out:
/// Gaussian likelihood + `Σ log(sech(s)/π)` + Gaussian prior on `A`.
pub fn log_joint(x: &Matrix, s: &Matrix, a: &Matrix, sigma: f64, sigma2: f64) -> f64 {
    use core::f64::consts::PI;
    let resid = x - &s.matmul_t(a);
    let ssr: f64 = resid.data().iter().map(|r| r * r).sum();
    let nobs = x.data().len() as f64;
    let lik = -0.5 * nobs * libm::log(2.0 * PI * sigma * sigma) - 0.5 * ssr / (sigma * sigma);
    let prior_s: f64 = s.data().iter().map(|&v| -libm::log(PI) - log_cosh(v)).sum();
    let asq: f64 = a.data().iter().map(|v| v * v).sum();
    let na = a.data().len() as f64;
    let prior_a = -0.5 * na * libm::log(2.0 * PI * sigma2 * sigma2) - 0.5 * asq / (sigma2 * sigma2);
    lik + prior_s + prior_a
}

/// Runs the sampler from the state selected by `cfg.init`.
pub fn run_gibbs_ice(x: &Matrix, cfg: &GibbsConfig) -> Result<Trace> {
    cfg.validate()?;
    let state = match cfg.init {
        GibbsInit::Identity => GibbsState::initial(x),
        GibbsInit::Em => GibbsState::from_em(x)?,
    };
    run_gibbs_ice_from(x, cfg, state)
}

pub fn run_gibbs_ice_from(x: &Matrix, cfg: &GibbsConfig, mut state: GibbsState) -> Result<Trace> {
    cfg.validate()?;
    let (n, d) = x.shape();
    if n <= d {
        return Err(Error::InsufficientSamples { have: n, need: d + 1 });
    }
    let echo = TraceConfig { iterations: cfg.iterations, burn_in: cfg.burn_in, thin: cfg.thin, seed: cfg.seed };
    let mut trace = Trace::new(echo, n, d, cfg.keep_sources);
    let mut rng = RngStream::new(cfg.seed, 0);
    for m in 1..=cfg.iterations {
        gibbs_ice_step_at(&mut state, x, cfg.sigma_at(m), cfg.sigma2, &mut rng)?;
        let lj = log_joint(x, &state.s, &state.a, cfg.sigma, cfg.sigma2);
        if !lj.is_finite() {
            return Err(Error::non_finite(alloc::format!("log joint at sweep {m}")));
        }
        trace.log_joint.push(lj);
        if Trace::is_kept(&echo, m) {
            trace.push(m, &state.a, &state.s);
        }
    }
    Ok(trace)
}
