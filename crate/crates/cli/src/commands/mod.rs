pub mod bench;
pub mod fit;
pub mod generate;
pub mod metrics;
pub mod theory;

use std::path::{Path, PathBuf};

use pgica_core::metrics::evaluate;
use pgica_core::Matrix;

use crate::formats::{DatasetFile, MetricsRow};
use crate::CliError;

pub(crate) fn path_flag(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

/// Invalid parameters reported by the core are usage errors.
pub(crate) fn core_error(e: pgica_core::Error) -> CliError {
    match e {
        pgica_core::Error::InvalidParameter(msg) => CliError::Usage(msg),
        other => CliError::Runtime(other.into()),
    }
}

/// Metrics for an estimate `(Ŵ, Ŝ)` against the dataset's truth.
pub(crate) fn score(
    method: &str,
    data: &DatasetFile,
    w: &Matrix,
    s: &Matrix,
    runtime_ms: Option<u64>,
) -> anyhow::Result<MetricsRow> {
    let meta = data.meta.as_ref();
    let (s_true, a_true) = match (&data.s, &data.a) {
        (Some(s), Some(a)) => (s, a),
        _ => anyhow::bail!("dataset has no ground truth"),
    };
    let (report, _) = evaluate(&data.x, w, s, a_true, s_true, true)?;
    Ok(MetricsRow {
        method: method.to_string(),
        family: meta.map_or_else(|| "unknown".to_string(), |m| m.family.clone()),
        n: data.x.rows(),
        d: data.x.cols(),
        sigma: meta.map_or(f64::NAN, |m| m.sigma),
        seed: meta.map_or(0, |m| m.seed),
        amari: Some(report.amari),
        src: Some(report.src),
        rmse: Some(report.rmse),
        d_pm: report.d_pm,
        runtime_ms,
        status: "ok".to_string(),
    })
}

pub(crate) fn announce(what: &str, path: &Path) {
    println!("wrote {what} {}", path.display());
}
