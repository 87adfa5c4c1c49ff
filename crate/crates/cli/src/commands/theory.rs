//! `theory ibp | fisher | lan | bvm`: one JSON report per run,
//! `{check, family, d, draws | ns, residuals | slopes, pass, details, config}`.
//! Exit code 0 iff the report passes.

use pgica_core::distributions::SourceFamily;
use pgica_core::theory::{
    bvm_study, check_ibp, fisher_info_mc, lan_study, BvmStudyConfig, LanConfig, NoiselessModel, Z_THRESHOLD,
};
use pgica_core::{Matrix, RngStream};
use serde_json::{json, Value};

use super::{core_error, path_flag};
use crate::cli::{BvmArgs, LanArgs, TheoryArgs, TheoryCheck, TheoryCommon};
use crate::config::{ConfigFile, List, Resolver};
use crate::formats::{write_json, Config, MatrixRecord};
use crate::{output_path, Outcome};

pub const LAN_SLOPE_BAND: (f64, f64) = (-0.7, -0.3);
pub const BVM_MAX_REL_ERR: f64 = 0.15;
pub const CONTRACTION_SLOPE_BAND: (f64, f64) = (-0.65, -0.35);

fn in_band(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

fn mat(m: &Matrix) -> Value {
    serde_json::to_value(MatrixRecord::plain(m)).expect("matrix serializes")
}

/// Model shared by every check: `d` copies of `family`, `W₀` drawn from `seed`.
fn model(r: &mut Resolver, family: Option<SourceFamily>, d: Option<usize>, seed: u64) -> Result<(NoiselessModel, SourceFamily), crate::CliError> {
    let family = r.get("family", family, SourceFamily::sech())?;
    let d = r.get("d", d, 2usize)?;
    Ok((NoiselessModel::seeded(family, d, seed).map_err(core_error)?, family))
}

fn caveat(model: &NoiselessModel) -> Value {
    if model.is_smooth() {
        Value::Null
    } else {
        json!("log density is not three times differentiable at 0; identities hold with the score defined almost everywhere")
    }
}

fn finish(out: std::path::PathBuf, mut report: Value, config: Config) -> Outcome {
    report["config"] = json!(config);
    write_json(&out, &report)?;
    let pass = report["pass"].as_bool().unwrap_or(false);
    println!("{} {}: {}", report["check"].as_str().unwrap_or(""), if pass { "PASS" } else { "FAIL" }, out.display());
    Ok(pass)
}

fn ibp(cfg: &ConfigFile, a: TheoryCommon) -> Outcome {
    let mut r = cfg.resolver("theory.ibp");
    let seed: u64 = r.require("seed", a.seed)?;
    let (model, family) = model(&mut r, a.family, a.d, seed)?;
    let draws = r.get("draws", a.draws, 100_000usize)?;
    let out = output_path(r.get("out", path_flag(a.out), format!("theory_ibp_{family}.json"))?.as_ref());
    let config = r.finish()?;
    let rep = check_ibp(&model, draws, &mut RngStream::new(seed, 1)).map_err(core_error)?;
    let d = model.d();
    let residual = Matrix::from_fn(d, d, |k, l| rep.moment[(k, l)] + if k == l { 1.0 } else { 0.0 });
    let report = json!({
        "check": "ibp",
        "family": family.token(),
        "d": d,
        "draws": draws,
        "residuals": {
            "psi_s_plus_identity": mat(&residual),
            "psi_s_se": mat(&rep.moment_se),
            "psi_s_max_z": rep.moment_max_z,
            "score_mean": rep.score_mean,
            "score_se": rep.score_se,
            "score_max_z": rep.score_max_z,
        },
        "pass": rep.pass,
        "details": { "threshold_se": Z_THRESHOLD, "W0": mat(model.w0()), "smooth": rep.smooth, "caveat": caveat(&model) },
    });
    finish(out, report, config)
}

fn fisher(cfg: &ConfigFile, a: TheoryCommon) -> Outcome {
    let mut r = cfg.resolver("theory.fisher");
    let seed: u64 = r.require("seed", a.seed)?;
    let (model, family) = model(&mut r, a.family, a.d, seed)?;
    let draws = r.get("draws", a.draws, 100_000usize)?;
    let out = output_path(r.get("out", path_flag(a.out), format!("theory_fisher_{family}.json"))?.as_ref());
    let config = r.finish()?;
    let info = fisher_info_mc(&model, draws, &mut RngStream::new(seed, 1)).map_err(core_error)?;
    let min_eig = info.min_eigenvalue().map_err(core_error)?;
    let report = json!({
        "check": "fisher",
        "family": family.token(),
        "d": model.d(),
        "draws": draws,
        "residuals": {
            "information": mat(&info.matrix),
            "outer_product": mat(&info.outer_product),
            "standard_error_scale": info.standard_error_scale,
            "equality_max_z": info.equality_max_z,
            "min_eigenvalue": min_eig,
        },
        "pass": info.equality_holds() && min_eig > 0.0,
        "details": { "threshold_se": Z_THRESHOLD, "W0": mat(model.w0()), "caveat": caveat(&model) },
    });
    finish(out, report, config)
}

fn lan(cfg: &ConfigFile, a: LanArgs) -> Outcome {
    let mut r = cfg.resolver("theory.lan");
    let seed: u64 = r.require("seed", a.seed)?;
    let (model, family) = model(&mut r, a.family, a.d, seed)?;
    let defaults = LanConfig::new(seed);
    let ns = r.get("ns", a.ns, List(defaults.ns.clone()))?;
    let reps = r.get("reps", a.reps, defaults.reps)?;
    let h_norm = r.get("h-norm", a.h_norm, defaults.h_norm)?;
    let radius = r.get("radius", a.radius, defaults.radius)?;
    let fisher_draws = r.get("fisher-draws", a.fisher_draws, 100_000usize)?;
    let out = output_path(r.get("out", path_flag(a.out), format!("theory_lan_{family}.json"))?.as_ref());
    let config = r.finish()?;
    let info = fisher_info_mc(&model, fisher_draws, &mut RngStream::new(seed, 1)).map_err(core_error)?;
    let lan_cfg = LanConfig { ns: ns.0.clone(), reps, h_norm, radius, seed };
    let rep = lan_study(&model, &info.matrix, &lan_cfg).map_err(core_error)?;
    let points: Vec<Value> = rep
        .points
        .iter()
        .map(|p| json!({ "N": p.n, "median_abs_remainder": p.median_abs, "skipped": p.skipped }))
        .collect();
    let report = json!({
        "check": "lan",
        "family": family.token(),
        "d": model.d(),
        "ns": ns.0,
        "slopes": { "log_log_median_remainder": rep.slope, "band": [LAN_SLOPE_BAND.0, LAN_SLOPE_BAND.1] },
        "pass": in_band(rep.slope, LAN_SLOPE_BAND),
        "details": { "reps": reps, "h_norm": h_norm, "points": points, "W0": mat(model.w0()), "caveat": caveat(&model) },
    });
    finish(out, report, config)
}

fn bvm(cfg: &ConfigFile, a: BvmArgs) -> Outcome {
    let mut r = cfg.resolver("theory.bvm");
    let seed: u64 = r.require("seed", a.seed)?;
    let (model, family) = model(&mut r, a.family, a.d, seed)?;
    let defaults = BvmStudyConfig::new(seed);
    let ns = match r.optional("n", a.n)? {
        Some(n) => vec![n],
        None => r.get("ns", a.ns, List(defaults.ns.clone()))?.0,
    };
    let study_cfg = BvmStudyConfig {
        ns: ns.clone(),
        iterations: r.get("iters", a.iters, defaults.iterations)?,
        burn_in: r.get("burnin", a.burnin, defaults.burn_in)?,
        prior_sd: r.get("prior-sd", a.prior_sd, defaults.prior_sd)?,
        fisher_draws: r.get("fisher-draws", a.fisher_draws, defaults.fisher_draws)?,
        seed,
    };
    let out = output_path(r.get("out", path_flag(a.out), format!("theory_bvm_{family}.json"))?.as_ref());
    let config = r.finish()?;
    let study = bvm_study(&model, &study_cfg).map_err(core_error)?;
    let largest = study.reports.iter().max_by_key(|r| r.n).expect("at least one sample size");
    let cov_pass = largest.max_rel_err <= BVM_MAX_REL_ERR;
    let slope_pass = study.reports.len() < 2 || in_band(study.contraction_slope, CONTRACTION_SLOPE_BAND);
    let per_n: Vec<Value> = study
        .reports
        .iter()
        .map(|b| {
            json!({
                "N": b.n,
                "draws": b.draws,
                "acceptance_rate": b.acceptance_rate,
                "ess_min": b.ess_min,
                "scaled_cov": mat(&b.scaled_cov),
                "rel_err_diag": b.rel_err_diag,
                "max_rel_err": b.max_rel_err,
                "ks_statistics": b.ks_statistics,
                "ks_critical": b.ks_critical,
                "ks_thin": b.ks_thin,
                "dpm_median": b.dpm_median,
                "dpm_q90": b.dpm_q90,
            })
        })
        .collect();
    let report = json!({
        "check": "bvm",
        "family": family.token(),
        "d": model.d(),
        "ns": ns,
        "slopes": {
            "dpm_q90_contraction": if study.reports.len() >= 2 { json!(study.contraction_slope) } else { Value::Null },
            "band": [CONTRACTION_SLOPE_BAND.0, CONTRACTION_SLOPE_BAND.1],
        },
        "residuals": { "max_rel_err_at_largest_n": largest.max_rel_err, "threshold": BVM_MAX_REL_ERR },
        "pass": cov_pass && slope_pass,
        "details": {
            "inverse_information": mat(&largest.reference),
            "fisher_draws": study.fisher.mc_draws,
            "per_n": per_n,
            "W0": mat(model.w0()),
            "caveat": caveat(&model),
        },
    });
    finish(out, report, config)
}

pub fn run(cfg: &ConfigFile, a: TheoryArgs) -> Outcome {
    match a.check {
        TheoryCheck::Ibp(c) => ibp(cfg, c),
        TheoryCheck::Fisher(c) => fisher(cfg, c),
        TheoryCheck::Lan(c) => lan(cfg, c),
        TheoryCheck::Bvm(c) => bvm(cfg, c),
    }
}
