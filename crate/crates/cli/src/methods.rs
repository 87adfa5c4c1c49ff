//! The estimators behind `fit` and `bench`, with a common output shape.

use std::fmt;
use std::str::FromStr;

use anyhow::Context;
use pgica_core::gibbs::{
    posterior_summary, run_gibbs_ice, run_student_t_gibbs, GibbsConfig, GibbsInit, StudentTGibbsConfig, Trace,
};
use pgica_core::numerics::inverse;
use pgica_core::optim::{fastica, run_em, run_mackay};
use pgica_core::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    GibbsIce,
    GibbsT,
    Em,
    Mackay,
    FastIca,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::GibbsIce, Method::GibbsT, Method::Em, Method::Mackay, Method::FastIca];

    pub fn name(self) -> &'static str {
        match self {
            Method::GibbsIce => "gibbs-ice",
            Method::GibbsT => "gibbs-t",
            Method::Em => "em",
            Method::Mackay => "mackay",
            Method::FastIca => "fastica",
        }
    }

    pub fn is_sampler(self) -> bool {
        matches!(self, Method::GibbsIce | Method::GibbsT)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected gibbs-ice, gibbs-t, em, mackay or fastica)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitArg(pub GibbsInit);

impl FromStr for InitArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "em" => Ok(InitArg(GibbsInit::Em)),
            "identity" => Ok(InitArg(GibbsInit::Identity)),
            _ => Err(format!("unknown init '{s}' (expected em or identity)")),
        }
    }
}

impl fmt::Display for InitArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            GibbsInit::Em => "em",
            GibbsInit::Identity => "identity",
        })
    }
}

/// Every tunable of every method; each method reads its own fields.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodParams {
    pub seed: u64,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub sigma: f64,
    pub sigma2: f64,
    pub init: GibbsInit,
    pub anneal_from: Option<f64>,
    pub keep_sources: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub eta: f64,
}

impl MethodParams {
    pub fn defaults(seed: u64, sigma: f64) -> Self {
        MethodParams {
            seed,
            iters: 4000,
            burnin: 2000,
            thin: 5,
            sigma,
            sigma2: 1.0,
            init: GibbsInit::Em,
            anneal_from: None,
            keep_sources: false,
            alpha: 3.0,
            lambda: 1.0,
            max_iter: 500,
            tol: 1e-8,
            eta: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub w: Matrix,
    /// Source estimate: posterior mean for samplers, `X·Wᵀ` otherwise.
    pub s: Matrix,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: Option<bool>,
    pub history: Vec<f64>,
    pub trace: Option<Trace>,
}

pub fn run_method(method: Method, x: &Matrix, p: &MethodParams) -> anyhow::Result<MethodOutput> {
    let d = x.cols();
    match method {
        Method::GibbsIce => {
            let cfg = GibbsConfig {
                iterations: p.iters,
                burn_in: p.burnin,
                thin: p.thin,
                sigma: p.sigma,
                sigma2: p.sigma2,
                seed: p.seed,
                keep_sources: p.keep_sources,
                init: p.init,
                anneal_from: p.anneal_from,
            };
            let trace = run_gibbs_ice(x, &cfg).context("gibbs-ice sampler")?;
            sampler_output(trace)
        }
        Method::GibbsT => {
            let cfg = StudentTGibbsConfig {
                iterations: p.iters,
                burn_in: p.burnin,
                thin: p.thin,
                keep_sources: p.keep_sources,
                ..StudentTGibbsConfig::new(p.alpha, p.lambda, p.seed)
            };
            let trace = run_student_t_gibbs(x, &cfg).context("gibbs-t sampler")?;
            sampler_output(trace)
        }
        Method::Em | Method::Mackay => {
            let w0 = Matrix::identity(d);
            let state = if method == Method::Em {
                run_em(x, &w0, p.max_iter, p.tol).context("EM")?
            } else {
                run_mackay(x, &w0, p.eta, p.max_iter, p.tol).context("natural gradient")?
            };
            Ok(MethodOutput {
                s: x.matmul_t(&state.w),
                w: state.w,
                iterations: state.iteration,
                final_objective: state.loglik,
                converged: Some(state.converged),
                history: state.history,
                trace: None,
            })
        }
        Method::FastIca => {
            let fit = fastica(x, p.max_iter, p.tol, p.seed).context("FastICA")?;
            let objective = pgica_core::optim::objective(&fit.w, x).unwrap_or(f64::NAN);
            Ok(MethodOutput {
                s: x.matmul_t(&fit.w),
                w: fit.w,
                iterations: fit.iterations,
                final_objective: objective,
                converged: Some(fit.converged),
                history: Vec::new(),
                trace: None,
            })
        }
    }
}

fn sampler_output(trace: Trace) -> anyhow::Result<MethodOutput> {
    let summary = posterior_summary(&trace)?;
    let kept = trace.kept_log_joint();
    let final_objective = kept.last().copied().unwrap_or(f64::NAN);
    let w = inverse(&summary.a_mean).context("posterior-mean mixing matrix is singular")?;
    Ok(MethodOutput {
        w,
        s: summary.s_mean,
        iterations: trace.config.iterations,
        final_objective,
        converged: None,
        history: kept,
        trace: Some(trace),
    })
}
