use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gmc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gmc_last_error()) }.to_string_lossy().into_owned()
}

fn quick(seed: u64) -> GmcSampler {
    GmcSampler {
        chains: 2,
        burn_in: 300,
        iterations: 1000,
        thin: 1,
        seed,
    }
}

fn curve_data(shift: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..60).map(|i| i as f64 / 59.0).collect();
    let y = t.iter().map(|t| (6.0 * t).sin() + shift).collect();
    (y, t)
}

fn param_names(fit: *const GmcFit) -> Vec<String> {
    let mut n = 0;
    assert_eq!(unsafe { gmc_fit_n_params(fit, &mut n) }, GmcStatus::Ok);
    (0..n)
        .map(|i| {
            let mut needed = 0;
            let st = unsafe { gmc_fit_param_name(fit, i, ptr::null_mut(), 0, &mut needed) };
            assert_eq!(st, GmcStatus::BufferTooSmall);
            let mut buf = vec![0u8; needed];
            let st = unsafe { gmc_fit_param_name(fit, i, buf.as_mut_ptr().cast(), buf.len(), ptr::null_mut()) };
            assert_eq!(st, GmcStatus::Ok);
            CStr::from_bytes_with_nul(&buf).unwrap().to_str().unwrap().to_owned()
        })
        .collect()
}

#[test]
fn regression_fit_round_trip() {
    let (y, t) = curve_data(0.0);
    let mut fit = ptr::null_mut();
    let st = unsafe { gmc_fit_regression(y.as_ptr(), t.as_ptr(), y.len(), 6, &quick(1), &mut fit) };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());

    let names = param_names(fit);
    assert!(names.iter().any(|n| n == "sigma"), "{names:?}");
    let name = CString::new("sigma").unwrap();
    let mut idx = usize::MAX;
    assert_eq!(unsafe { gmc_fit_param_index(fit, name.as_ptr(), &mut idx) }, GmcStatus::Ok);
    assert_eq!(names[idx], "sigma");

    let mut n_draws = 0;
    assert_eq!(unsafe { gmc_fit_n_draws(fit, &mut n_draws) }, GmcStatus::Ok);
    assert_eq!(n_draws, 2000);
    let mut draws = vec![0.0; n_draws];
    assert_eq!(unsafe { gmc_fit_draws(fit, idx, draws.as_mut_ptr(), n_draws) }, GmcStatus::Ok);
    let mut mean = 0.0;
    assert_eq!(unsafe { gmc_fit_posterior_mean(fit, idx, &mut mean) }, GmcStatus::Ok);
    let direct = draws.iter().sum::<f64>() / n_draws as f64;
    assert!((mean - direct).abs() < 1e-12);
    let st = unsafe { gmc_fit_draws(fit, idx, draws.as_mut_ptr(), n_draws - 1) };
    assert_eq!(st, GmcStatus::BufferTooSmall);

    let grid = [0.1, 0.5, 0.9];
    let (mut m, mut lo, mut hi) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    let st = unsafe {
        gmc_fit_curve(fit, GmcCurve::Primary, grid.as_ptr(), 3, 0.95, m.as_mut_ptr(), lo.as_mut_ptr(), hi.as_mut_ptr())
    };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());
    for i in 0..3 {
        assert!(lo[i] <= m[i] && m[i] <= hi[i]);
        assert!((m[i] - (6.0 * grid[i]).sin()).abs() < 0.2, "{m:?}");
    }
    let st = unsafe {
        gmc_fit_curve(fit, GmcCurve::Supplemental, grid.as_ptr(), 3, 0.95, m.as_mut_ptr(), lo.as_mut_ptr(), hi.as_mut_ptr())
    };
    assert_eq!(st, GmcStatus::WrongKind);
    let st = unsafe { gmc_fit_median_survival(fit, 730.0, 0.95, m.as_mut_ptr()) };
    assert_eq!(st, GmcStatus::WrongKind);
    unsafe { gmc_fit_free(fit) };
}

#[test]
fn regression_gmc_fit_exposes_both_curves() {
    let (y, t) = curve_data(0.0);
    let (y0, t0) = curve_data(0.0);
    let hyper = gmc_regression_hyper_default();
    assert_eq!(hyper.r, 2000.0);
    let mut fit = ptr::null_mut();
    let st = unsafe {
        gmc_fit_regression_gmc(y.as_ptr(), t.as_ptr(), y.len(), y0.as_ptr(), t0.as_ptr(), y0.len(), 6, &hyper, &quick(2), &mut fit)
    };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());
    let names = param_names(fit);
    assert!(names.iter().any(|n| n == "nu"), "{names:?}");
    let grid = [0.25, 0.75];
    let (mut m, mut lo, mut hi) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    let st = unsafe {
        gmc_fit_curve(fit, GmcCurve::Supplemental, grid.as_ptr(), 2, 0.9, m.as_mut_ptr(), lo.as_mut_ptr(), hi.as_mut_ptr())
    };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());
    unsafe { gmc_fit_free(fit) };
}

fn exponential_times(n: usize, rate: f64) -> (Vec<f64>, Vec<u8>) {
    // deterministic quantiles of Exp(rate) censored at 1
    (1..=n)
        .map(|i| {
            let t = -(1.0 - i as f64 / (n + 1) as f64).ln() / rate;
            if t >= 1.0 {
                (1.0, 0)
            } else {
                (t, 1)
            }
        })
        .unzip()
}

#[test]
fn survival_fits_report_curves_and_medians() {
    let (time, event) = exponential_times(200, 2.0);
    let mut fit = ptr::null_mut();
    let st = unsafe { gmc_fit_survival(time.as_ptr(), event.as_ptr(), time.len(), 3, &quick(3), &mut fit) };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());
    let mut med = [0.0; 3];
    assert_eq!(unsafe { gmc_fit_median_survival(fit, 730.0, 0.95, med.as_mut_ptr()) }, GmcStatus::Ok);
    let exact = 730.0 * 2f64.ln() / 2.0;
    assert!((med[0] - exact).abs() < 0.15 * exact, "{med:?}");
    assert!(med[1] <= med[0] && med[0] <= med[2]);
    let grid = [0.0, 0.5];
    let (mut m, mut lo, mut hi) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    let st = unsafe { gmc_fit_survival_curve(fit, grid.as_ptr(), 2, 0.95, m.as_mut_ptr(), lo.as_mut_ptr(), hi.as_mut_ptr()) };
    assert_eq!(st, GmcStatus::Ok);
    assert_eq!(m[0], 1.0);
    assert!((m[1] - (-1.0f64).exp()).abs() < 0.1, "{m:?}");
    unsafe { gmc_fit_free(fit) };

    let (time0, event0) = exponential_times(250, 2.0);
    let mut fit = ptr::null_mut();
    let st = unsafe {
        gmc_fit_survival_gmc(
            time.as_ptr(), event.as_ptr(), time.len(),
            time0.as_ptr(), event0.as_ptr(), time0.len(),
            3, 200.0, 1.0, 1.0, &quick(4), &mut fit,
        )
    };
    assert_eq!(st, GmcStatus::Ok, "{}", last_error());
    let name = CString::new("nu_gamma").unwrap();
    let mut idx = 0;
    assert_eq!(unsafe { gmc_fit_param_index(fit, name.as_ptr(), &mut idx) }, GmcStatus::Ok);
    let mut nu = 0.0;
    assert_eq!(unsafe { gmc_fit_posterior_mean(fit, idx, &mut nu) }, GmcStatus::Ok);
    assert!(nu > 0.5, "nu_gamma {nu}");
    unsafe { gmc_fit_free(fit) };
}

#[test]
fn errors_are_reported_with_codes() {
    let (y, t) = curve_data(0.0);
    let mut fit = ptr::null_mut();
    let st = unsafe { gmc_fit_regression(ptr::null(), t.as_ptr(), y.len(), 6, &quick(1), &mut fit) };
    assert_eq!(st, GmcStatus::NullPointer);
    assert!(last_error().contains("`y`"), "{}", last_error());
    assert!(fit.is_null());

    let st = unsafe { gmc_fit_regression(y.as_ptr(), t.as_ptr(), y.len(), 6, ptr::null(), &mut fit) };
    assert_eq!(st, GmcStatus::NullPointer);

    let mut bad = y.clone();
    bad[3] = f64::NAN;
    let st = unsafe { gmc_fit_regression(bad.as_ptr(), t.as_ptr(), y.len(), 6, &quick(1), &mut fit) };
    assert_eq!(st, GmcStatus::Validation);
    assert!(!last_error().is_empty());

    let zero_chains = GmcSampler { chains: 0, ..quick(1) };
    let st = unsafe { gmc_fit_regression(y.as_ptr(), t.as_ptr(), y.len(), 6, &zero_chains, &mut fit) };
    assert_eq!(st, GmcStatus::Validation);

    let (time, _) = exponential_times(20, 1.0);
    let none = vec![0u8; time.len()];
    let st = unsafe { gmc_fit_survival(time.as_ptr(), none.as_ptr(), time.len(), 2, &quick(1), &mut fit) };
    assert_ne!(st, GmcStatus::Ok);
    assert!(fit.is_null());

    let mut n = 0;
    assert_eq!(unsafe { gmc_fit_n_params(ptr::null(), &mut n) }, GmcStatus::NullPointer);
    unsafe { gmc_fit_free(ptr::null_mut()) };
}

#[test]
fn defaults_and_version() {
    let s = gmc_sampler_survival_default(7);
    assert_eq!((s.chains, s.burn_in, s.iterations, s.thin, s.seed), (2, 2000, 10_000, 1, 7));
    let r = gmc_sampler_regression_default(8);
    assert_eq!((r.burn_in, r.iterations), (1000, 5000));
    let v = unsafe { CStr::from_ptr(gmc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gmc.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

/// Compiles `tests/c/smoke.c` against the header and the static library.
#[test]
fn c_program_links_and_fits() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libgmc_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("gmc_smoke");
    let out = Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("smoke ok"), "{stdout}");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
