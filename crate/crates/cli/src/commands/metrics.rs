use std::path::Path;

use anyhow::Context;

use super::{announce, path_flag, score};
use crate::cli::MetricsArgs;
use crate::config::ConfigFile;
use crate::formats::{read_dataset, read_fit, read_matrix_csv, write_csv, write_metrics_to};
use crate::{output_path, Outcome};

pub fn run(cfg: &ConfigFile, a: MetricsArgs) -> Outcome {
    let mut r = cfg.resolver("metrics");
    let estimate: String = r.require("estimate", path_flag(a.estimate))?;
    let data_path: String = r.require("data", path_flag(a.data))?;
    let out = r.optional("out", path_flag(a.out))?;
    let config = r.finish()?;

    let data = read_dataset(Path::new(&data_path))?;
    let est = Path::new(&estimate);
    let (method, w, s) = if est.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        ("external".to_string(), read_matrix_csv(est)?, None)
    } else {
        let fit = read_fit(est)?;
        let s = fit.s.as_ref().map(|m| m.to_matrix()).transpose()?;
        (fit.method.clone(), fit.w.to_matrix()?, s)
    };
    if w.shape() != (data.x.cols(), data.x.cols()) {
        return Err(anyhow::anyhow!("estimate W is {}x{} but the data have {} columns", w.rows(), w.cols(), data.x.cols()).into());
    }
    let s = s.unwrap_or_else(|| data.x.matmul_t(&w));
    let row = score(&method, &data, &w, &s, None).context("scoring estimate")?;
    match out {
        Some(p) => {
            let p = output_path(p.as_ref());
            write_csv(&p, &config, &[], std::slice::from_ref(&row))?;
            announce("metrics", &p);
        }
        None => write_metrics_to(std::io::stdout().lock(), &config, std::slice::from_ref(&row))?,
    }
    Ok(true)
}
