use std::path::{Path, PathBuf};
use std::time::Instant;

use pgica_core::gibbs::Trace;

use super::{announce, path_flag, score};
use crate::cli::FitArgs;
use crate::config::{ConfigFile, Resolver};
use crate::formats::{
    append_metrics_row, read_dataset, write_json, Config, DatasetFile, FitFile, MatrixRecord, TraceWriter,
};
use crate::methods::{run_method, InitArg, Method, MethodParams};
use crate::{output_path, CliError, Outcome};

/// Resolves the flags `method` reads, leaving the rest out of the record.
fn resolve_params(r: &mut Resolver, a: &FitArgs, method: Method, data: &DatasetFile) -> Result<MethodParams, CliError> {
    let data_sigma = data.meta.as_ref().map(|m| m.sigma);
    let mut p = MethodParams::defaults(0, data_sigma.unwrap_or(f64::NAN));
    if matches!(method, Method::GibbsIce | Method::GibbsT | Method::FastIca) {
        p.seed = r.require("seed", a.seed)?;
    }
    match method {
        Method::GibbsIce | Method::GibbsT => {
            p.iters = r.get("iters", a.iters, p.iters)?;
            p.burnin = r.get("burnin", a.burnin, p.burnin)?;
            p.thin = r.get("thin", a.thin, p.thin)?;
            p.keep_sources = r.switch("keep-sources", a.keep_sources)?;
            if method == Method::GibbsIce {
                p.sigma = match data_sigma {
                    Some(s) => r.get("sigma", a.sigma, s)?,
                    None => r.require("sigma", a.sigma)?,
                };
                p.sigma2 = r.get("sigma2", a.sigma2, p.sigma2)?;
                p.init = r.get("init", a.init, InitArg(p.init))?.0;
                p.anneal_from = r.optional("anneal-from", a.anneal_from)?;
            } else {
                p.alpha = r.get("alpha", a.alpha, p.alpha)?;
                p.lambda = r.get("lambda", a.lambda, p.lambda)?;
            }
        }
        Method::Em | Method::Mackay | Method::FastIca => {
            p.max_iter = r.get("max-iter", a.max_iter, p.max_iter)?;
            p.tol = r.get("tol", a.tol, p.tol)?;
            if method == Method::Mackay {
                p.eta = r.get("eta", a.eta, p.eta)?;
            }
        }
    }
    Ok(p)
}

fn write_trace(path: &Path, method: Method, config: &Config, trace: &Trace) -> anyhow::Result<()> {
    let mut w = TraceWriter::create(path, method.name(), config)?;
    let logjoint = trace.kept_log_joint();
    for (k, (&m, a)) in trace.kept_iterations.iter().zip(&trace.a_draws).enumerate() {
        let s = trace.s_draws.as_ref().map(|s| &s[k]);
        w.draw(m, a, logjoint[k], s)?;
    }
    w.finish()
}

pub fn run(cfg: &ConfigFile, a: FitArgs) -> Outcome {
    let mut r = cfg.resolver("fit");
    let data_path: String = r.require("data", path_flag(a.data.clone()))?;
    let method: Method = r.require("method", a.method)?;
    let data = read_dataset(Path::new(&data_path))?;
    let params = resolve_params(&mut r, &a, method, &data)?;
    let timing = r.switch("timing", a.timing)?;
    let out = output_path(r.get("out", path_flag(a.out.clone()), format!("fit_{method}.json"))?.as_ref());
    let trace_path = if method.is_sampler() {
        let default = out.with_extension("trace.jsonl").display().to_string();
        Some(output_path(r.get("trace", path_flag(a.trace.clone()), default)?.as_ref()))
    } else {
        None
    };
    let metrics_path: PathBuf = output_path(r.get("metrics", path_flag(a.metrics.clone()), "metrics.csv".into())?.as_ref());
    let config = r.finish()?;

    let start = Instant::now();
    let result = run_method(method, &data.x, &params)?;
    let runtime_ms = timing.then(|| start.elapsed().as_millis() as u64);

    if let (Some(path), Some(trace)) = (&trace_path, &result.trace) {
        write_trace(path, method, &config, trace)?;
        announce("trace", path);
    }
    let fit = FitFile {
        method: method.name().to_string(),
        w: MatrixRecord::plain(&result.w),
        iterations: result.iterations,
        final_objective: result.final_objective,
        converged: result.converged,
        objective_history: result.history.clone(),
        s: method.is_sampler().then(|| MatrixRecord::plain(&result.s)),
        config: config.clone(),
    };
    write_json(&out, &fit)?;
    announce("fit", &out);

    if data.has_truth() {
        let row = score(method.name(), &data, &result.w, &result.s, runtime_ms)?;
        append_metrics_row(&metrics_path, &config, &row)?;
        announce("metrics row to", &metrics_path);
        println!(
            "amari={} src={} rmse={} d_pm={}",
            row.amari.unwrap_or(f64::NAN),
            row.src.unwrap_or(f64::NAN),
            row.rmse.unwrap_or(f64::NAN),
            row.d_pm.unwrap_or(f64::NAN)
        );
    } else {
        eprintln!("notice: dataset has no ground truth; metrics row omitted");
    }
    Ok(true)
}
