//! Benchmark sweep: families × sizes × noise levels × methods × replicates.
//!
//! Replicate `r` of a scenario uses seed `seed + r` for both the dataset and
//! the method. Tasks run on a rayon pool; rows are collected and written in
//! task order, so the output does not depend on the pool width.

use std::path::Path;
use std::time::Instant;

use pgica_core::datagen::generate_benchmark;
use pgica_core::distributions::SourceFamily;
use pgica_core::stats::{mean, median};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{path_flag, score};
use crate::cli::BenchArgs;
use crate::config::{ConfigFile, List, Size};
use crate::formats::{write_csv, DatasetFile, DatasetMeta, MetricsRow};
use crate::methods::{run_method, Method, MethodParams};
use crate::{output_path, CliError, Outcome};

/// The cell checked against the Table-1-motivated gate.
pub const GATE_CELL: (&str, &str, usize, usize, f64) = ("gibbs-ice", "laplace", 500, 4, 0.01);
pub const GATE_MIN_SRC: f64 = 0.90;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub families: Vec<SourceFamily>,
    pub sizes: Vec<Size>,
    pub sigmas: Vec<f64>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct Task {
    family: SourceFamily,
    size: Size,
    sigma: f64,
    rep: usize,
    method: Method,
}

impl Grid {
    fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &size in &self.sizes {
                for &sigma in &self.sigmas {
                    for &method in &self.methods {
                        for rep in 0..self.reps {
                            out.push(Task { family, size, sigma, rep, method });
                        }
                    }
                }
            }
        }
        out
    }
}

fn run_task(task: &Task, grid: &Grid, base: &MethodParams, timing: bool) -> anyhow::Result<MetricsRow> {
    let seed = grid.seed + task.rep as u64;
    let ds = generate_benchmark(task.family, task.size.n, task.size.d, task.sigma, seed)?;
    let truth = ds.truth.as_ref().expect("benchmark data carries truth");
    let data = DatasetFile {
        meta: Some(DatasetMeta {
            protocol: "benchmark".into(),
            n: task.size.n,
            d: task.size.d,
            sigma: task.sigma,
            family: task.family.token(),
            seed,
            families: None,
            standardized: true,
            config: Default::default(),
        }),
        x: ds.x.clone(),
        s: Some(truth.s.clone()),
        a: Some(truth.a.clone()),
    };
    let params = MethodParams { seed, sigma: task.sigma, ..base.clone() };
    let start = Instant::now();
    let out = run_method(task.method, &data.x, &params)?;
    let runtime = timing.then(|| start.elapsed().as_millis() as u64);
    score(task.method.name(), &data, &out.w, &out.s, runtime)
}

fn error_row(task: &Task, grid: &Grid) -> MetricsRow {
    MetricsRow {
        method: task.method.name().into(),
        family: task.family.token(),
        n: task.size.n,
        d: task.size.d,
        sigma: task.sigma,
        seed: grid.seed + task.rep as u64,
        amari: None,
        src: None,
        rmse: None,
        d_pm: None,
        runtime_ms: None,
        status: "error".into(),
    }
}

/// One aggregate line per (method, family, n, d, sigma) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub family: String,
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub reps: usize,
    /// Replicates that finished; the statistics use only these.
    pub ok: usize,
    pub amari_mean: Option<f64>,
    pub amari_median: Option<f64>,
    pub src_mean: Option<f64>,
    pub src_median: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub rmse_median: Option<f64>,
    pub d_pm_mean: Option<f64>,
    pub d_pm_median: Option<f64>,
    /// `PASS`/`FAIL` for the gated cell, empty elsewhere.
    pub gate: String,
}

fn stat(values: &[f64], f: fn(&[f64]) -> f64) -> Option<f64> {
    (!values.is_empty()).then(|| f(values))
}

/// Groups rows by cell in order of first appearance.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, String, usize, usize, u64)> = Vec::new();
    for r in rows {
        let k = (r.method.clone(), r.family.clone(), r.n, r.d, r.sigma.to_bits());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, family, n, d, sigma_bits)| {
            let sigma = f64::from_bits(sigma_bits);
            let cell: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.method == method && r.family == family && r.n == n && r.d == d && r.sigma == sigma)
                .collect();
            let ok: Vec<&&MetricsRow> = cell.iter().filter(|r| r.status == "ok").collect();
            let col = |f: fn(&MetricsRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let (amari, src, rmse, dpm) = (col(|r| r.amari), col(|r| r.src), col(|r| r.rmse), col(|r| r.d_pm));
            let src_mean = stat(&src, mean);
            let gated = (method.as_str(), family.as_str(), n, d, sigma) == GATE_CELL;
            let gate = match (gated, src_mean) {
                (false, _) => String::new(),
                (true, Some(m)) if m >= GATE_MIN_SRC => "PASS".into(),
                (true, _) => "FAIL".into(),
            };
            AggregateRow {
                reps: cell.len(),
                ok: ok.len(),
                amari_mean: stat(&amari, mean),
                amari_median: stat(&amari, median),
                src_mean,
                src_median: stat(&src, median),
                rmse_mean: stat(&rmse, mean),
                rmse_median: stat(&rmse, median),
                d_pm_mean: stat(&dpm, mean),
                d_pm_median: stat(&dpm, median),
                gate,
                method,
                family,
                n,
                d,
                sigma,
            }
        })
        .collect()
}

pub fn run(cfg: &ConfigFile, a: BenchArgs) -> Outcome {
    let mut r = cfg.resolver("bench");
    let seed: u64 = r.require("seed", a.seed)?;
    let families = r.get(
        "families",
        a.families,
        List(vec![SourceFamily::sech(), SourceFamily::t3(), SourceFamily::laplace(), SourceFamily::mixed()]),
    )?;
    let sizes = r.get("sizes", a.sizes, List(vec![Size { n: 500, d: 4 }, Size { n: 2000, d: 8 }]))?;
    let sigmas = r.get("sigmas", a.sigmas, List(vec![0.01, 0.05]))?;
    let methods =
        r.get("methods", a.methods, List(vec![Method::GibbsIce, Method::Em, Method::Mackay, Method::FastIca]))?;
    let reps = r.get("reps", a.reps, 10usize)?;
    let mut base = MethodParams::defaults(seed, f64::NAN);
    base.iters = r.get("iters", a.iters, base.iters)?;
    base.burnin = r.get("burnin", a.burnin, base.burnin)?;
    base.thin = r.get("thin", a.thin, base.thin)?;
    base.max_iter = r.get("max-iter", a.max_iter, base.max_iter)?;
    base.tol = r.get("tol", a.tol, base.tol)?;
    base.eta = r.get("eta", a.eta, base.eta)?;
    let threads = r.get("threads", a.threads, 0usize)?;
    let timing = r.switch("timing", a.timing)?;
    let out_dir = output_path(r.get("out", path_flag(a.out), "bench".into())?.as_ref());
    let config = r.finish()?;
    if reps == 0 || families.0.is_empty() || sizes.0.is_empty() || sigmas.0.is_empty() || methods.0.is_empty() {
        return Err(CliError::Usage("empty benchmark grid".into()));
    }
    let grid = Grid { families: families.0, sizes: sizes.0, sigmas: sigmas.0, methods: methods.0, reps, seed };

    let tasks = grid.tasks();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(anyhow::Error::from)?;
    let rows: Vec<MetricsRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                run_task(t, &grid, &base, timing).unwrap_or_else(|e| {
                    eprintln!(
                        "cell {} {} {} sigma={} rep={} failed: {e:#}",
                        t.method, t.family, t.size, t.sigma, t.rep
                    );
                    error_row(t, &grid)
                })
            })
            .collect()
    });

    let agg = aggregate(&rows);
    let rows_path = out_dir.join("rows.csv");
    let agg_path = out_dir.join("aggregate.csv");
    write_csv(&rows_path, &config, &[], &rows)?;
    let notes = [format!("aggregation: mean and median over {reps} replicates per cell")];
    write_csv(&agg_path, &config, &notes, &agg)?;
    print_table(&agg);
    println!("wrote {} and {}", rows_path.display(), agg_path.display());
    Ok(true)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn print_table(agg: &[AggregateRow]) {
    println!("{:<10} {:<9} {:>5} {:>3} {:>6} {:>4}  {:>8} {:>8} {:>8}  gate", "method", "family", "n", "d", "sigma", "ok", "amari", "src", "rmse");
    for r in agg {
        println!(
            "{:<10} {:<9} {:>5} {:>3} {:>6} {:>4}  {:>8} {:>8} {:>8}  {}",
            r.method,
            r.family,
            r.n,
            r.d,
            r.sigma,
            format!("{}/{}", r.ok, r.reps),
            fmt_opt(r.amari_mean),
            fmt_opt(r.src_mean),
            fmt_opt(r.rmse_mean),
            r.gate
        );
    }
}

/// Recomputes the aggregate from a rows CSV written by this command.
pub fn aggregate_file(rows_csv: &Path) -> anyhow::Result<Vec<AggregateRow>> {
    Ok(aggregate(&crate::formats::read_csv(rows_csv)?))
}
