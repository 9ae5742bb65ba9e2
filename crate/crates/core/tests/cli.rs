mod common;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{ctp_fixture, phi_n, survival_pair, write_regression_csv, write_survival_csv};
use gmc_core::regression::Source;
use gmc_core::sim::{generate_pair, SimConfig};

const FAST: [&str; 6] = ["--burn-in", "100", "--iterations", "300", "--chains", "2"];

fn gmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmc"))
        .args(args)
        .env_remove("GMC_THREADS")
        .output()
        .expect("spawn gmc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn regression_file(dir: &Path) -> PathBuf {
    let cfg = SimConfig::desk_default(1);
    let (prim, supp) = generate_pair(1.0, &cfg, 3).unwrap();
    let path = dir.join("reg.csv");
    write_regression_csv(&path, &prim.concat(&supp));
    path
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every CSV in the bundle carries the manifest's run id in its first column.
fn assert_bundle(dir: &Path) {
    let m = manifest(dir);
    let id = m["run_id"].as_str().unwrap();
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let name = o.as_str().unwrap();
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("run_id,"), "{name}");
        for line in lines {
            assert!(line.starts_with(id), "{name}: {line}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = gmc(&["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&gmc(&[])), 2);
    assert_eq!(code(&gmc(&["fit-regression", "--out", "x"])), 2);
    assert_eq!(code(&gmc(&["--help"])), 0);
}

#[test]
fn regression_bundle_and_summarize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = regression_file(dir.path());
    let out = dir.path().join("fit");
    let mut args = vec!["fit-regression", "--data", s(&data), "--out", s(&out), "--source", "primary", "--K", "8"];
    args.extend(FAST);
    let o = gmc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["draws.csv", "summary.csv", "diagnostics.csv", "curve_primary.csv", "derivative_primary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_bundle(&out);
    let curve = std::fs::read_to_string(out.join("curve_primary.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "run_id,grid_t,mean,lower,upper");
    assert_eq!(curve.lines().count(), 102);

    let again = dir.path().join("summ");
    let o = gmc(&["summarize", "--draws", s(&out.join("draws.csv")), "--out", s(&again)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = std::fs::read(out.join("summary.csv")).unwrap();
    let b = std::fs::read(again.join("summary.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(manifest(&again)["run_id"], manifest(&out)["run_id"]);
}

#[test]
fn manifest_tracks_inputs_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = regression_file(dir.path());
    let run = |out: &str, seed: &str| {
        let out = dir.path().join(out);
        let mut args = vec!["fit-regression", "--data", s(&data), "--out", s(&out), "--seed", seed];
        args.extend(FAST);
        let o = gmc(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (manifest(&out), std::fs::read(out.join("draws.csv")).unwrap())
    };
    let (a, da) = run("a", "5");
    let (b, db) = run("b", "5");
    let (c, _) = run("c", "6");
    assert_eq!(a["run_id"], b["run_id"]);
    assert_eq!(a["config_digest"], b["config_digest"]);
    assert_eq!(da, db);
    assert_ne!(a["config_digest"], c["config_digest"]);
    assert_ne!(a["run_id"], c["run_id"]);
    let digest = gmc_core::io::sha256_hex(&std::fs::read(&data).unwrap());
    assert_eq!(a["inputs"][0]["sha256"], digest.as_str());
    assert_eq!(a["seed"], 5);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let data = regression_file(dir.path());
    let cfg = dir.path().join("fit.cfg");
    std::fs::write(&cfg, "# small run\nburn_in = 50\niterations = 200\nK = 6\nR = 1000\nforce_indicators = all_one\n").unwrap();
    let out = dir.path().join("gmc");
    let o = gmc(&["fit-regression-gmc", "--config", s(&cfg), "--data", s(&data), "--out", s(&out), "--K", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains(",b[8],") && !summary.contains(",b[9],"));
    assert!(out.join("curve_supplemental.csv").exists());

    std::fs::write(&cfg, "iterations = 200\nsede = 3\n").unwrap();
    let o = gmc(&["fit-regression-gmc", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sede"));
}

#[test]
fn invalid_data_exits_2_and_missing_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,t,source\n1,0.2,primary\n1,1.5,primary\n").unwrap();
    let out = dir.path().join("o");
    let o = gmc(&["fit-regression", "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&gmc(&["fit-regression", "--data", s(&missing), "--out", s(&out)])), 3);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = regression_file(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_gmc"))
        .args(["fit-regression", "--data", s(&data), "--out", s(&dir.path().join("o"))])
        .env("GMC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn ctp_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let data = ctp_fixture(3, 12, 0.2, |t| phi_n(t) + 0.5, 4);
    let mut text = String::from("y,t,source,individual,region,tissue\n");
    let h = data.hierarchy.as_ref().unwrap();
    for i in 0..data.len() {
        writeln!(text, "{},{},{},{},{},{}", data.y[i], data.t[i], data.source[i], h.individual[i], h.region[i], h.tissue[i])
            .unwrap();
    }
    let path = dir.path().join("ctp.csv");
    std::fs::write(&path, text).unwrap();
    let out = dir.path().join("ctp");
    let mut args = vec!["fit-ctp", "--data", s(&path), "--out", s(&out), "--K", "6"];
    args.extend(FAST);
    let o = gmc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["curve_cancerous.csv", "curve_noncancerous.csv", "identifiability.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_bundle(&out);
}

fn survival_files(dir: &Path) -> (PathBuf, PathBuf) {
    let (prim, supp) = survival_pair(1.0, 2);
    let p = dir.join("primary.csv");
    let q = dir.join("supplemental.csv");
    write_survival_csv(&p, &prim, 730.0);
    write_survival_csv(&q, &supp.relabel(Source::Primary), 730.0);
    (p, q)
}

#[test]
fn survival_gmc_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let (p, q) = survival_files(dir.path());
    let out = dir.path().join("surv");
    let mut args = vec![
        "fit-survival-gmc", "--primary", s(&p), "--supplemental", s(&q), "--K", "8", "--R-gamma", "10000",
        "--nu-prior", "0.10,0.90", "--out", s(&out),
    ];
    args.extend(FAST);
    let o = gmc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let borrowing = std::fs::read_to_string(out.join("borrowing.csv")).unwrap();
    assert!(borrowing.contains(",iota[8],") && borrowing.contains(",nu_gamma,"), "{borrowing}");
    for f in ["medians.csv", "survival_reference.csv", "survival_supplemental.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_bundle(&out);

    let o = gmc(&["fit-survival-gmc", "--primary", s(&p), "--supplemental", s(&q), "--nu-prior", "0.1", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn survival_conventional_km_and_partition_selection() {
    let dir = tempfile::tempdir().unwrap();
    let (p, _) = survival_files(dir.path());
    let out = dir.path().join("conv");
    let mut args = vec!["fit-survival", "--data", s(&p), "--knots", "0,0.25,0.5,1", "--out", s(&out)];
    args.extend(FAST);
    let o = gmc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains(",gamma[3],") && !summary.contains(",gamma[4],"));

    let km = dir.path().join("km");
    let o = gmc(&["km", "--data", s(&p), "--out", s(&km)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(km.join("km.csv")).unwrap();
    assert!(text.lines().count() > 10);
    assert_bundle(&km);

    let sel = dir.path().join("sel");
    let mut args = vec!["select-partition", "--data", s(&p), "--candidates", "1,4,6:quantile", "--out", s(&sel)];
    args.extend(FAST);
    let o = gmc(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dic = std::fs::read_to_string(sel.join("dic.csv")).unwrap();
    assert_eq!(dic.lines().count(), 4);
    let o = gmc(&["select-partition", "--data", s(&p), "--candidates", "x", "--out", s(&sel)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "d_grid = 0, 5\nM = 4\nmode = stratified\nburn_in = 50\niterations = 200\n").unwrap();
    let out = dir.path().join("sim");
    let o = gmc(&["simulate", "--config", s(&cfg), "--out", s(&out), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().next().unwrap(), "run_id,replicate,seed,d,estimator,me,rmse,criw,cp");
    assert_eq!(records.lines().count(), 1 + 4 * 3);
    let aggregate = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 2 * 3);
    assert_bundle(&out);
}
