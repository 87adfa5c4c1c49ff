use std::path::Path;
use std::process::{Command, Output};

use pgica::commands::bench::{aggregate_file, AggregateRow};
use pgica::formats::{read_csv, read_dataset, read_fit, read_json, MetricsRow};

fn pgica(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgica"))
        .args(args)
        .current_dir(dir)
        .env_remove("PGICA_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pgica(dir, args);
    assert!(out.status.success(), "pgica {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path) -> String {
    ok(dir, &["generate", "--protocol", "benchmark", "--family", "laplace", "--n", "300", "--d", "3", "--seed", "4", "--out", "data.jsonl"]);
    "data.jsonl".to_string()
}

#[test]
fn generate_writes_truth_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["generate", "--protocol", "hierarchical", "--n", "200", "--d", "3", "--seed", "1"]);
    assert!(stdout.contains("\"protocol\":\"hierarchical\""));
    let ds = read_dataset(&dir.path().join("hierarchical_pg-hierarchical_n200_d3_seed1.jsonl")).unwrap();
    assert_eq!((ds.x.rows(), ds.x.cols()), (200, 3));
    assert!(ds.has_truth());
    let meta = ds.meta.unwrap();
    assert_eq!(meta.seed, 1);
    assert_eq!(meta.config.get("seed").map(String::as_str), Some("1"));
}

#[test]
fn missing_seed_is_a_usage_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgica(dir.path(), &["generate", "--n", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));

    let data = generate(dir.path());
    let out = pgica(dir.path(), &["fit", "--data", &data, "--method", "gibbs-ice"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn bad_arguments_exit_two_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pgica(dir.path(), &["fit", "--method", "jade"]).status.code(), Some(2));
    assert_eq!(pgica(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(pgica(dir.path(), &["--help"]).status.code(), Some(0));
    // A section key the command never reads is rejected.
    std::fs::write(dir.path().join("bad.cfg"), "[generate]\nprotocol=benchmark\nfamily=sech\nseed=1\nbogus=1\n").unwrap();
    let out = pgica(dir.path(), &["generate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn missing_input_file_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgica(dir.path(), &["fit", "--data", "nope.jsonl", "--method", "em"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn metrics_command_matches_the_row_written_by_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    ok(dir.path(), &["fit", "--data", &data, "--method", "gibbs-ice", "--seed", "2", "--iters", "400", "--burnin", "200"]);
    ok(dir.path(), &["fit", "--data", &data, "--method", "em", "--out", "em.json"]);
    let fit_rows: Vec<MetricsRow> = read_csv(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(fit_rows.len(), 2);

    for (estimate, row) in [("fit_gibbs-ice.json", &fit_rows[0]), ("em.json", &fit_rows[1])] {
        ok(dir.path(), &["metrics", "--estimate", estimate, "--data", &data, "--out", "m.csv"]);
        let rows: Vec<MetricsRow> = read_csv(&dir.path().join("m.csv")).unwrap();
        assert_eq!(&rows[0], row);
    }
    let fit = read_fit(&dir.path().join("fit_gibbs-ice.json")).unwrap();
    assert_eq!(fit.method, "gibbs-ice");
    assert_eq!(fit.config.get("iters").map(String::as_str), Some("400"));
    let trace = std::fs::read_to_string(dir.path().join("fit_gibbs-ice.trace.jsonl")).unwrap();
    // header plus (400 - 200) / 5 kept draws
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn metrics_accepts_a_bare_csv_unmixing_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    ok(dir.path(), &["fit", "--data", &data, "--method", "em", "--out", "em.json"]);
    let w = read_fit(&dir.path().join("em.json")).unwrap().w.to_matrix().unwrap();
    pgica::formats::write_matrix_csv(&dir.path().join("w.csv"), &w).unwrap();
    let stdout = ok(dir.path(), &["metrics", "--estimate", "w.csv", "--data", &data]);
    let line = stdout.lines().find(|l| l.starts_with("external,")).expect("metrics row on stdout");
    let em: Vec<MetricsRow> = read_csv(&dir.path().join("metrics.csv")).unwrap();
    let amari: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
    assert_eq!(Some(amari), em[0].amari);
}

#[test]
fn rerun_from_output_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path());
    ok(dir.path(), &["fit", "--data", &data, "--method", "fastica", "--seed", "9", "--out", "a.json", "--metrics", "a.csv"]);
    ok(dir.path(), &["fit", "--config", "a.json", "--out", "b.json", "--metrics", "b.csv"]);
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.csv"), read("b.csv"));

    ok(dir.path(), &["generate", "--config", "data.jsonl", "--out", "data2.jsonl"]);
    assert_eq!(read("data.jsonl"), read("data2.jsonl"));
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "seed = 3\n[generate]\nprotocol = benchmark\nfamily = sech\nn = 120\nd = 2\n",
    )
    .unwrap();
    ok(dir.path(), &["generate", "--config", "run.cfg", "--n", "150", "--out", "g.jsonl"]);
    let ds = read_dataset(&dir.path().join("g.jsonl")).unwrap();
    assert_eq!(ds.x.rows(), 150);
    let meta = ds.meta.unwrap();
    assert_eq!((meta.family.as_str(), meta.seed), ("sech", 3));
}

#[test]
fn output_dir_variable_reroots_relative_outputs() {
    let work = tempfile::tempdir().unwrap();
    let outputs = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pgica"))
        .args(["generate", "--protocol", "benchmark", "--family", "sech", "--n", "100", "--d", "2", "--seed", "1", "--out", "x.jsonl"])
        .current_dir(work.path())
        .env("PGICA_OUTPUT_DIR", outputs.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(outputs.path().join("x.jsonl").exists());
    assert!(!work.path().join("x.jsonl").exists());
}

#[test]
fn bench_aggregate_is_recomputable_from_rows() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["bench", "--families", "laplace,t3", "--sizes", "200x3", "--sigmas", "0.01,0.05", "--methods", "em,fastica", "--reps", "3", "--seed", "1", "--threads", "2", "--out", "grid"],
    );
    assert!(stdout.contains("fastica"));
    let rows: Vec<MetricsRow> = read_csv(&dir.path().join("grid/rows.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 3);
    assert!(rows.iter().all(|r| r.status == "ok"));
    let stored: Vec<AggregateRow> = read_csv(&dir.path().join("grid/aggregate.csv")).unwrap();
    assert_eq!(aggregate_file(&dir.path().join("grid/rows.csv")).unwrap(), stored);
    assert_eq!(stored.len(), 8);
    assert!(stored.iter().all(|a| a.reps == 3 && a.ok == 3));
    let header = std::fs::read_to_string(dir.path().join("grid/aggregate.csv")).unwrap();
    assert!(header.contains("mean and median over 3 replicates"));
}

#[test]
fn theory_checks_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["theory", "ibp", "--seed", "2", "--draws", "20000", "--family", "t3"]);
    let r = read_json(&dir.path().join("theory_ibp_t3.json")).unwrap();
    assert_eq!(r["check"], "ibp");
    assert_eq!(r["pass"], true);
    assert_eq!(r["draws"], 20000);

    ok(dir.path(), &["theory", "fisher", "--seed", "2", "--draws", "20000", "--out", "f.json"]);
    let r = read_json(&dir.path().join("f.json")).unwrap();
    assert!(r["residuals"]["min_eigenvalue"].as_f64().unwrap() > 0.0);

    let out = pgica(dir.path(), &["theory", "bvm", "--seed", "2", "--n", "300", "--iters", "20000", "--burnin", "5000", "--fisher-draws", "20000"]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let r = read_json(&dir.path().join("theory_bvm_sech.json")).unwrap();
    assert_eq!(r["ns"][0], 300);
    assert!(r["slopes"]["dpm_q90_contraction"].is_null());

    let out = pgica(dir.path(), &["theory", "ibp", "--family", "gaussian", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
