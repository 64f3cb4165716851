//! End-to-end runs of the `gtreg` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gtreg::cli::config::DataConfig;
use gtreg::cli::data::load_sample;
use gtreg::cli::report::{load_fit, read_json, B0Sidecar, DiagnoseReport, SelectReport, DIAGNOSE_SCHEMA, SELECT_SCHEMA};
use tempfile::TempDir;

fn gtreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtreg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gtreg(args);
    assert!(
        out.status.success(),
        "gtreg {args:?} exited with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, kind: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("{kind}-{n}-{seed}.csv"));
    ok(&["simulate", "--kind", kind, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", s(&path)]);
    path
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn simulate_is_reproducible_and_sized() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&["simulate", "--kind", "baseline-gaussian", "--n", "5000", "--seed", "17", "--out", s(p)]);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 5001);
    assert_eq!(text.lines().next(), Some("y,x1"));
}

#[test]
fn location_scale_simulation_writes_true_coefficients() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 200, 3);
    let side: B0Sidecar = read_json(&data.with_extension("b0.json")).unwrap();
    assert_eq!(side.schema, "gtreg.b0.v1");
    assert_eq!(side.b0.len(), 4);
}

#[test]
fn simulated_files_ingest_without_warnings() {
    let dir = TempDir::new().unwrap();
    for kind in ["baseline-gaussian", "linear-location-scale", "bimodal-misspec", "melbourne-like"] {
        let data = simulate(dir.path(), kind, 300, 1);
        let cfg = DataConfig { path: Some(data), ..DataConfig::default() };
        let ing = load_sample(&cfg).unwrap();
        assert!(ing.warnings.is_empty(), "{kind}: {:?}", ing.warnings);
        assert_eq!(ing.sample.len(), 300);
    }
}

#[test]
fn fit_recovers_the_canonical_point_with_a_certificate() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "baseline-gaussian", 3000, 5);
    let out = dir.path().join("run");
    let stdout = ok(&["fit", "--data", s(&data), "--out", s(&out)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("duality gap"));
    let fit = load_fit(&out.join("fit.json")).unwrap();
    let side: B0Sidecar = read_json(&data.with_extension("b0.json")).unwrap();
    let se = &fit.covariance.as_ref().unwrap().se_raw;
    for ((b, b0), se) in fit.b_raw.iter().zip(&side.b0).zip(se) {
        assert!((b - b0).abs() <= 5.0 * se, "{b} vs {b0}");
    }
    assert!(fit.convergence.converged);
    assert!(fit.duality.gap <= 1e-8 * (1.0 + fit.duality.primal_value.abs()));
}

#[test]
fn missing_column_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "baseline-gaussian", 50, 0);
    let out = gtreg(&["fit", "--data", s(&data), "--covariates", "nope", "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`nope`"));
}

#[test]
fn missing_cells_are_a_data_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("holes.csv");
    std::fs::write(&data, "y,x1\n1,2\n,3\n2,4\n").unwrap();
    let out = gtreg(&["fit", "--data", s(&data), "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn lag_mode_pairs_consecutive_values() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "melbourne-like", 400, 2);
    let out = dir.path().join("run");
    ok(&["fit", "--data", s(&data), "--lag", "--out", s(&out)]);
    let fit = load_fit(&out.join("fit.json")).unwrap();
    assert_eq!(fit.data.n, 399);
    assert!(fit.data.lag);
}

#[test]
fn eval_quantile_bands_at_raw_lagged_values() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "melbourne-like", 1500, 4);
    let out = dir.path().join("run");
    ok(&["fit", "--data", s(&data), "--lag", "--out", s(&out)]);
    let mut args = vec!["eval", "--fit"];
    let fit_path = out.join("fit.json");
    args.push(s(&fit_path));
    args.extend(["--kind", "quantile", "--out", s(&out)]);
    for x in ["11.4", "17.6", "23.8", "29.9", "36.1"] {
        args.extend(["--x", x]);
    }
    ok(&args);
    let rows = csv_rows(&out.join("bands-quantile.csv"));
    assert_eq!(rows.len(), 5 * 19);
    assert_eq!(&rows[0][1], "11.4");
    for r in &rows {
        let (est, lo, hi): (f64, f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!(lo <= est && est <= hi);
    }
}

#[test]
fn eval_defaults_to_five_points_and_nineteen_levels() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 800, 9);
    let out = dir.path().join("run");
    ok(&["fit", "--data", s(&data), "--out", s(&out)]);
    ok(&["eval", "--fit", s(&out.join("fit.json")), "--kind", "quantile", "--out", s(&out)]);
    assert_eq!(csv_rows(&out.join("bands-quantile.csv")).len(), 95);
    ok(&["eval", "--fit", s(&out.join("fit.json")), "--kind", "cdf", "--grid", "-1,0,1", "--out", s(&out)]);
    assert_eq!(csv_rows(&out.join("bands-cdf.csv")).len(), 15);
}

#[test]
fn bands_need_a_stored_covariance() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 500, 1);
    let out = dir.path().join("run");
    let fit = gtreg(&["fit", "--data", s(&data), "--max-iter", "1", "--no-repair", "--out", s(&out)]);
    assert_eq!(fit.status.code(), Some(4));
    let report = load_fit(&out.join("fit.json")).unwrap();
    assert!(report.covariance.is_none());
    let ev = gtreg(&["eval", "--fit", s(&out.join("fit.json")), "--kind", "cdf", "--out", s(&out)]);
    assert_eq!(ev.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&ev.stderr).contains("covariance"));
}

#[test]
fn diagnose_reports_the_certificate_and_rejects_other_schemas() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 1000, 2);
    let out = dir.path().join("run");
    ok(&["fit", "--data", s(&data), "--out", s(&out)]);
    ok(&["diagnose", "--fit", s(&out.join("fit.json")), "--out", s(&out)]);
    let diag: DiagnoseReport = read_json(&out.join("diagnostics.json")).unwrap();
    assert_eq!(diag.schema, DIAGNOSE_SCHEMA);
    assert!(diag.duality.gap.is_finite());
    let raw = std::fs::read_to_string(out.join("diagnostics.json")).unwrap();
    assert!(raw.contains("\"gap\""));

    let bad = gtreg(&["diagnose", "--fit", s(&out.join("diagnostics.json")), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("schema"));
}

#[test]
fn select_with_one_candidate_matches_fit_plus_a_path() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 600, 6);
    let fit_dir = dir.path().join("fit");
    let sel_dir = dir.path().join("sel");
    ok(&["fit", "--data", s(&data), "--out", s(&fit_dir)]);
    ok(&["select", "--data", s(&data), "--candidate", "linear-linear", "--out", s(&sel_dir)]);
    let f = load_fit(&fit_dir.join("fit.json")).unwrap();
    let w = load_fit(&sel_dir.join("fit.json")).unwrap();
    assert_eq!(f.label, w.label);
    assert_eq!(f.dictionary, w.dictionary);
    assert!(f.path.is_none() && w.path.as_ref().is_some_and(|p| p.len() == 5));
    assert!(w.penalty.is_some());
    let sel: SelectReport = read_json(&sel_dir.join("selection.json")).unwrap();
    assert_eq!(sel.schema, SELECT_SCHEMA);
    assert_eq!(sel.artifacts, vec![Some("candidate-000.json".to_string())]);
    load_fit(&sel_dir.join("candidate-000.json")).unwrap();
}

#[test]
fn equal_bic_goes_to_the_earlier_candidate() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 400, 8);
    let out = dir.path().join("sel");
    ok(&["select", "--data", s(&data), "--candidate", "linear-linear", "--candidate", "linear-linear", "--lambda", "0.1", "--out", s(&out)]);
    let sel: SelectReport = read_json(&out.join("selection.json")).unwrap();
    assert_eq!(sel.ranking.len(), 2);
    assert_eq!(sel.ranking[0].bic, sel.ranking[1].bic);
    assert_eq!(sel.ranking[0].spec_index, 0);
}

#[test]
fn every_report_validates_against_its_schema() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "linear-location-scale", 600, 12);
    let out = dir.path().join("run");
    ok(&["select", "--data", s(&data), "--candidate", "linear-linear", "--candidate", "spline-linear:4", "--out", s(&out)]);
    ok(&["diagnose", "--fit", s(&out.join("fit.json")), "--out", s(&out)]);
    let mut fits = 0;
    for entry in std::fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        if name == "selection.json" {
            assert_eq!(read_json::<SelectReport>(&p).unwrap().schema, SELECT_SCHEMA);
        } else if name == "diagnostics.json" {
            assert_eq!(read_json::<DiagnoseReport>(&p).unwrap().schema, DIAGNOSE_SCHEMA);
        } else if name.ends_with(".json") {
            // also checks b_raw against the affine map of b_std
            load_fit(&p).unwrap();
            fits += 1;
        }
    }
    assert!(fits >= 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), "baseline-gaussian", 300, 0);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("output_dir = \"{}\"\ncandidates = [\"spline-linear:4\"]\n\n[data]\npath = \"{}\"\n", s(&dir.path().join("from-file")), s(&data)),
    )
    .unwrap();
    let out = dir.path().join("from-flag");
    ok(&["fit", "--config", s(&cfg), "--candidate", "linear-linear", "--out", s(&out)]);
    let fit = load_fit(&out.join("fit.json")).unwrap();
    assert_eq!(fit.b_raw.len(), 4);
    assert!(!dir.path().join("from-file").exists());

    std::fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(gtreg(&["fit", "--config", s(&cfg)]).status.code(), Some(2));
}
