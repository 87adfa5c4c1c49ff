//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `cargo test -p pgica --test acceptance`

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use pgica_core::datagen::{generate_benchmark, generate_hierarchical};
use pgica_core::distributions::{sample_pg1, SourceFamily};
use pgica_core::gibbs::{posterior_summary, run_gibbs_ice, GibbsConfig};
use pgica_core::metrics::{
    align_sources, amari_distance, assignment_cost, evaluate, exhaustive, hungarian, signed_perm_distance, src,
};
use pgica_core::numerics::inverse;
use pgica_core::optim::{em_estep, em_mstep, fastica, objective, ono_update};
use pgica_core::stats::{mean, McEstimate};
use pgica_core::theory::{
    bvm_study, check_ibp, fisher_info_mc, lan_study, BvmStudyConfig, LanConfig, NoiselessModel,
};
use pgica_core::{Matrix, RngStream};

type Check = Result<String, String>;

fn pass_if(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn mc(xs: &[f64]) -> McEstimate {
    McEstimate::from_samples(xs)
}

// 1. PG(1, c) draws: mean and Laplace transform within 3 SE.
fn pg_sampler() -> Check {
    let draws = 100_000;
    let mut worst = 0.0f64;
    for (k, &c) in [0.0f64, 1.0, 2.5].iter().enumerate() {
        let mut rng = RngStream::new(101, k as u64);
        let xs: Vec<f64> = (0..draws).map(|_| sample_pg1(c, &mut rng)).collect::<Result<_, _>>().map_err(fail)?;
        let target = if c == 0.0 { 0.25 } else { (c / 2.0).tanh() / (2.0 * c) };
        worst = worst.max(mc(&xs).z_score(target).abs());
    }
    let mut rng = RngStream::new(101, 9);
    let xs: Vec<f64> = (0..draws).map(|_| sample_pg1(0.0, &mut rng)).collect::<Result<_, _>>().map_err(fail)?;
    for t in [0.5f64, 1.0, 2.0] {
        let e: Vec<f64> = xs.iter().map(|&tau| (-t * tau).exp()).collect();
        worst = worst.max(mc(&e).z_score(1.0 / (t / 2.0).sqrt().cosh()).abs());
    }
    pass_if(worst <= 3.0, format!("max |z| = {worst:.2} (limit 3)"))
}

// 2. E[exp(-2τs²)] = 1/cosh(s) for τ ~ PG(1, 0).
fn sech_mixture() -> Check {
    let mut rng = RngStream::new(202, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_pg1(0.0, &mut rng)).collect::<Result<_, _>>().map_err(fail)?;
    let mut worst = 0.0f64;
    for s in [0.0f64, 0.7, 1.5] {
        let e: Vec<f64> = xs.iter().map(|&tau| (-2.0 * tau * s * s).exp()).collect();
        let z = if s == 0.0 {
            // every term is exactly 1
            if e.iter().all(|&v| v == 1.0) { 0.0 } else { f64::INFINITY }
        } else {
            mc(&e).z_score(1.0 / s.cosh()).abs()
        };
        worst = worst.max(z);
    }
    pass_if(worst <= 3.0, format!("max |z| = {worst:.2} (limit 3)"))
}

// 3. IBP identities for sech and t3 sources.
fn ibp_identities() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, family) in [SourceFamily::sech(), SourceFamily::t3()].into_iter().enumerate() {
        let model = NoiselessModel::seeded(family, 3, 7 + k as u64).map_err(fail)?;
        let rep = check_ibp(&model, 100_000, &mut RngStream::new(303, k as u64)).map_err(fail)?;
        ok &= rep.pass;
        parts.push(format!("{}: moment z {:.2}, score z {:.2}", family.token(), rep.moment_max_z, rep.score_max_z));
    }
    pass_if(ok, format!("{} (limit 4)", parts.join("; ")))
}

fn random_signed_perm(d: usize, rng: &mut RngStream) -> Matrix {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = (rng.uniform01() * (i + 1) as f64) as usize;
        perm.swap(i, j.min(i));
    }
    Matrix::from_fn(d, d, |i, j| if perm[i] == j { if rng.uniform01() < 0.5 { -1.0 } else { 1.0 } } else { 0.0 })
}

fn gaussian(r: usize, c: usize, rng: &mut RngStream) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.standard_normal())
}

// 4. Metric oracles and invariances.
fn metric_oracles() -> Check {
    let mut rng = RngStream::new(404, 0);
    let mut worst_assign = 0.0f64;
    for _ in 0..50 {
        let cost = Matrix::from_fn(6, 6, |_, _| rng.uniform01() * 10.0);
        let fast = assignment_cost(&cost, &hungarian(&cost));
        worst_assign = worst_assign.max((fast - exhaustive::min_assignment_cost(&cost)).abs());
    }
    let mut worst_dpm = 0.0f64;
    for _ in 0..50 {
        let (w, w0) = (gaussian(4, 4, &mut rng), gaussian(4, 4, &mut rng));
        worst_dpm = worst_dpm.max((signed_perm_distance(&w, &w0) - exhaustive::signed_perm_distance(&w, &w0)).abs());
    }
    let hand = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).map_err(fail)?;
    let amari_hand = amari_distance(&hand, &Matrix::identity(2)).map_err(fail)?;

    let mut worst_inv = 0.0f64;
    let mut scale_breaks_dpm = true;
    for _ in 0..20 {
        let d = 4;
        let (w_hat, w_true) = (gaussian(d, d, &mut rng), gaussian(d, d, &mut rng));
        let dp = random_signed_perm(d, &mut rng);
        let moved = dp.matmul(&w_hat);
        let am = amari_distance(&w_hat, &w_true).map_err(fail)?;
        worst_inv = worst_inv.max((amari_distance(&moved, &w_true).map_err(fail)? - am).abs());
        // Row rescaling leaves the Amari zero set alone; away from it the
        // column terms of the formula do move, so only the orbit is checked.
        let rescaled = Matrix::from_fn(d, d, |i, j| w_hat[(i, j)] * (0.5 + i as f64));
        let truth_rescaled = Matrix::from_fn(d, d, |i, j| w_true[(i, j)] * (0.5 + i as f64));
        worst_inv = worst_inv.max(amari_distance(&dp.matmul(&truth_rescaled), &w_true).map_err(fail)?);
        let dpm = signed_perm_distance(&w_hat, &w_true);
        worst_inv = worst_inv.max((signed_perm_distance(&moved, &w_true) - dpm).abs());
        scale_breaks_dpm &= (signed_perm_distance(&rescaled, &w_true) - dpm).abs() > 1e-6;

        let s_true = gaussian(200, d, &mut rng);
        let s_hat = &s_true.matmul(&gaussian(d, d, &mut rng).scale(0.2)) + &s_true;
        let src_of = |s: &Matrix| -> Result<f64, String> {
            let al = align_sources(s, &s_true).map_err(fail)?;
            src(&al.apply_columns(s), &s_true).map_err(fail)
        };
        worst_inv = worst_inv.max((src_of(&s_hat.matmul_t(&dp))? - src_of(&s_hat)?).abs());
    }
    let ok = worst_assign < 1e-9 && worst_dpm < 1e-10 && amari_hand == 1.0 && worst_inv < 1e-10 && scale_breaks_dpm;
    pass_if(
        ok,
        format!(
            "assignment gap {worst_assign:.1e}, d± gap {worst_dpm:.1e}, Amari hand example {amari_hand}, \
             invariance gap {worst_inv:.1e}, d± scale-sensitive {scale_breaks_dpm}"
        ),
    )
}

// 5. EM ascent and EM = auxiliary-function iterates.
fn em_properties() -> Check {
    let mut min_step = f64::INFINITY;
    let mut max_gap = 0.0f64;
    for seed in 1..=5u64 {
        let ds = generate_benchmark(SourceFamily::sech(), 500, 4, 0.01, seed).map_err(fail)?;
        let (mut w_em, mut w_ono) = (Matrix::identity(4), Matrix::identity(4));
        let mut prev = objective(&w_em, &ds.x).map_err(fail)?;
        for _ in 0..100 {
            w_em = em_mstep(&em_estep(&w_em, &ds.x), &w_em).map_err(fail)?;
            w_ono = ono_update(&w_ono, &ds.x).map_err(fail)?;
            let next = objective(&w_em, &ds.x).map_err(fail)?;
            min_step = min_step.min(next - prev);
            prev = next;
            max_gap = max_gap.max(w_em.max_abs_diff(&w_ono));
        }
    }
    // Non-decreasing up to floating-point roundoff of an O(1) objective.
    pass_if(
        min_step >= -1e-12 && max_gap <= 1e-10,
        format!("smallest objective step {min_step:.2e}, max EM/auxiliary-function gap {max_gap:.1e}"),
    )
}

fn per_component_src(seed: u64, hard: bool) -> Result<Vec<f64>, String> {
    let sigma = if hard { 0.1 } else { 0.01 };
    let ds = generate_hierarchical(500, 4, sigma, 1.0, hard, seed).map_err(fail)?;
    let truth = ds.truth.as_ref().expect("generated data carry truth");
    let trace = run_gibbs_ice(&ds.x, &GibbsConfig::new(sigma, seed)).map_err(fail)?;
    let summary = posterior_summary(&trace).map_err(fail)?;
    let al = align_sources(&summary.s_mean, &truth.s).map_err(fail)?;
    let inv = al.inverse_permutation();
    Ok((0..4).map(|j| al.matched_abs_corr[inv[j]]).collect())
}

// 6. Gibbs-ICE recovery on the two generative cases.
fn gibbs_recovery() -> Check {
    let (mut case1, mut case2) = (0, 0);
    let mut worst_seconds = 0.0f64;
    for seed in 1..=5u64 {
        let t = Instant::now();
        let c1 = per_component_src(seed, false)?;
        worst_seconds = worst_seconds.max(t.elapsed().as_secs_f64());
        case1 += c1.iter().all(|&v| v >= 0.95) as usize;
        let t = Instant::now();
        let c2 = per_component_src(seed, true)?;
        worst_seconds = worst_seconds.max(t.elapsed().as_secs_f64());
        case2 += c2[1..].iter().all(|&v| v >= 0.9) as usize;
    }
    pass_if(
        case1 >= 3 && case2 >= 3 && worst_seconds < 300.0,
        format!("case 1: {case1}/5 seeds, case 2: {case2}/5 seeds (need 3), slowest seed {worst_seconds:.1}s"),
    )
}

// 7. Benchmark gate and FastICA versus random unmixing.
fn benchmark_gate() -> Check {
    let reps = 10u64;
    let (mut srcs, mut rmses, mut optimal) = (Vec::new(), Vec::new(), Vec::new());
    let (mut fast, mut random) = (Vec::new(), Vec::new());
    for rep in 0..reps {
        let seed = 1 + rep;
        let ds = generate_benchmark(SourceFamily::laplace(), 500, 4, 0.01, seed).map_err(fail)?;
        let truth = ds.truth.as_ref().expect("truth");
        let summary = posterior_summary(&run_gibbs_ice(&ds.x, &GibbsConfig::new(0.01, seed)).map_err(fail)?).map_err(fail)?;
        let (report, _) = evaluate(&ds.x, &summary.w_mean, &summary.s_mean, &truth.a, &truth.s, false).map_err(fail)?;
        srcs.push(report.src);
        rmses.push(report.rmse);
        let noise = ds.noise().expect("truth");
        optimal.push((noise.data().iter().map(|v| v * v).sum::<f64>() / noise.data().len() as f64).sqrt());

        let ds = generate_benchmark(SourceFamily::t3(), 500, 4, 0.01, seed).map_err(fail)?;
        let w_true = inverse(&ds.truth.as_ref().expect("truth").a).map_err(fail)?;
        fast.push(amari_distance(&fastica(&ds.x, 500, 1e-8, seed).map_err(fail)?.w, &w_true).map_err(fail)?);
        let w_random = gaussian(4, 4, &mut RngStream::new(seed, 77));
        random.push(amari_distance(&w_random, &w_true).map_err(fail)?);
    }
    let (src_m, rmse_m, opt_m) = (mean(&srcs), mean(&rmses), mean(&optimal));
    let (fast_m, random_m) = (mean(&fast), mean(&random));
    pass_if(
        src_m >= 0.90 && rmse_m <= 2.0 * opt_m && 5.0 * fast_m <= random_m,
        format!(
            "Gibbs-ICE laplace mean SRC {src_m:.4}, mean RMSE {rmse_m:.5} vs noise {opt_m:.5}; \
             FastICA t3 Amari {fast_m:.3} vs random {random_m:.3}"
        ),
    )
}

// 8. LAN remainder rate.
fn lan_rate() -> Check {
    let model = NoiselessModel::seeded(SourceFamily::sech(), 2, 1).map_err(fail)?;
    let info = fisher_info_mc(&model, 100_000, &mut RngStream::new(1, 1)).map_err(fail)?;
    let rep = lan_study(&model, &info.matrix, &LanConfig::new(1)).map_err(fail)?;
    let medians: Vec<String> = rep.points.iter().map(|p| format!("{:.3}", p.median_abs)).collect();
    pass_if(
        (-0.7..=-0.3).contains(&rep.slope),
        format!("slope {:.3} in [-0.7, -0.3], medians {}", rep.slope, medians.join("/")),
    )
}

// 9. BvM covariance and contraction.
fn bvm() -> Check {
    let model = NoiselessModel::seeded(SourceFamily::sech(), 2, 1).map_err(fail)?;
    let study = bvm_study(&model, &BvmStudyConfig::new(1)).map_err(fail)?;
    let largest = study.reports.iter().max_by_key(|r| r.n).expect("three sample sizes");
    let slope = study.contraction_slope;
    pass_if(
        largest.max_rel_err <= 0.15 && (-0.65..=-0.35).contains(&slope),
        format!(
            "N={} max rel err {:.3} (limit 0.15), d± q90 slope {slope:.3} in [-0.65, -0.35]",
            largest.n, largest.max_rel_err
        ),
    )
}

fn pgica(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pgica"))
        .args(args)
        .env("PGICA_OUTPUT_DIR", dir)
        .output()
        .map_err(fail)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("pgica {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

// 10. Every command rerun from the config embedded in its output reproduces it byte for byte.
fn reproducibility() -> Check {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    std::fs::create_dir_all(&first).map_err(fail)?;
    std::fs::create_dir_all(&second).map_err(fail)?;
    let data = first.join("benchmark_laplace_n300_d3_seed5.jsonl");
    let data_s = data.to_str().expect("utf-8 temp path");
    let fit_em = first.join("fit_em.json");

    let runs: Vec<(Vec<&str>, &str)> = vec![
        (vec!["generate", "--protocol", "benchmark", "--family", "laplace", "--n", "300", "--d", "3", "--seed", "5"], "benchmark_laplace_n300_d3_seed5.jsonl"),
        (vec!["generate", "--protocol", "hierarchical", "--n", "200", "--d", "3", "--hard", "--seed", "2"], "hierarchical_pg-hierarchical_n200_d3_seed2.jsonl"),
        (vec!["fit", "--data", data_s, "--method", "gibbs-ice", "--seed", "5", "--iters", "300", "--burnin", "100"], "fit_gibbs-ice.json"),
        (vec!["fit", "--data", data_s, "--method", "gibbs-t", "--seed", "5", "--iters", "300", "--burnin", "100"], "fit_gibbs-t.json"),
        (vec!["fit", "--data", data_s, "--method", "em"], "fit_em.json"),
        (vec!["fit", "--data", data_s, "--method", "mackay", "--max-iter", "50"], "fit_mackay.json"),
        (vec!["fit", "--data", data_s, "--method", "fastica", "--seed", "5"], "fit_fastica.json"),
        (vec!["metrics", "--estimate", fit_em.to_str().expect("utf-8"), "--data", data_s, "--out", "metrics_em.csv"], "metrics_em.csv"),
        (vec!["bench", "--families", "laplace,t3", "--sizes", "200x3", "--sigmas", "0.01", "--methods", "em,fastica,mackay", "--reps", "2", "--seed", "3"], "bench/rows.csv"),
        (vec!["theory", "ibp", "--seed", "1", "--draws", "20000"], "theory_ibp_sech.json"),
        (vec!["theory", "fisher", "--seed", "1", "--draws", "20000"], "theory_fisher_sech.json"),
        (vec!["theory", "lan", "--seed", "1", "--reps", "10", "--fisher-draws", "20000"], "theory_lan_sech.json"),
        (vec!["theory", "bvm", "--seed", "1", "--n", "500", "--iters", "20000", "--burnin", "5000", "--fisher-draws", "20000"], "theory_bvm_sech.json"),
    ];
    for (args, _) in &runs {
        // Theory checks may fail their statistical gate at reduced size; only the files matter here.
        if let Err(e) = pgica(&first, args) {
            if args[0] != "theory" {
                return Err(e);
            }
        }
    }
    // Metrics are appended by every fit: rerun fits in the same order.
    for (args, produced) in &runs {
        let source = first.join(produced);
        let mut rerun = vec![args[0]];
        if args[0] == "theory" {
            rerun.push(args[1]);
        }
        let source_s = source.to_str().expect("utf-8").to_string();
        let mut rerun: Vec<String> = rerun.into_iter().map(String::from).collect();
        rerun.extend(["--config".to_string(), source_s]);
        if args[0] == "metrics" {
            rerun.extend(["--out".to_string(), "metrics_em.csv".to_string()]);
        }
        let rerun: Vec<&str> = rerun.iter().map(String::as_str).collect();
        if let Err(e) = pgica(&second, &rerun) {
            if args[0] != "theory" {
                return Err(e);
            }
        }
    }
    let (a, b) = (files_under(&first), files_under(&second));
    if a != b {
        return Err(format!("file sets differ: {a:?} vs {b:?}"));
    }
    let mut differing = Vec::new();
    for rel in &a {
        if std::fs::read(first.join(rel)).map_err(fail)? != std::fs::read(second.join(rel)).map_err(fail)? {
            differing.push(rel.display().to_string());
        }
    }
    pass_if(differing.is_empty(), format!("{} files compared, differing: {:?}", a.len(), differing))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("PG sampler moments and Laplace transform", pg_sampler),
        ("sech scale-mixture identity", sech_mixture),
        ("integration-by-parts identities", ibp_identities),
        ("metric oracles and invariances", metric_oracles),
        ("EM ascent and auxiliary-function equivalence", em_properties),
        ("Gibbs-ICE recovery, cases 1 and 2", gibbs_recovery),
        ("benchmark gate", benchmark_gate),
        ("LAN remainder rate", lan_rate),
        ("Bernstein-von Mises at desk scale", bvm),
        ("reproducibility from embedded config", reproducibility),
    ];
    let only: Option<usize> = std::env::var("PGICA_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {id:>2} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
