use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cmom_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cmom_last_error()) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn ols_through_the_boundary() {
    // y = 1 + 2x exactly, plus a perturbation orthogonal to both columns.
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
    let bump = [1.0, -2.0, 0.0, 2.0, -1.0];
    let y: Vec<f64> = xs.iter().zip(bump).map(|(x, b)| 1.0 + 2.0 * x + 0.1 * b).collect();
    let design: Vec<f64> = xs.iter().flat_map(|x| [1.0, *x]).collect();
    let (mut coef, mut se, mut r2) = ([0.0; 2], [0.0; 2], 0.0);
    let s = unsafe { cmom_ols(y.as_ptr(), design.as_ptr(), 5, 2, -1, coef.as_mut_ptr(), se.as_mut_ptr(), &mut r2) };
    assert_eq!(s, CmomStatus::Ok);
    assert!((coef[0] - 1.0).abs() < 1e-12 && (coef[1] - 2.0).abs() < 1e-12, "{coef:?}");
    assert!(se[1] > 0.0 && r2 > 0.99);
    assert_eq!(last_error(), "");

    let (mut nw_coef, mut nw_se) = ([0.0; 2], [0.0; 2]);
    let s = unsafe { cmom_ols(y.as_ptr(), design.as_ptr(), 5, 2, 0, nw_coef.as_mut_ptr(), nw_se.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, CmomStatus::Ok);
    assert_eq!(nw_coef, coef);

    let collinear: Vec<f64> = xs.iter().flat_map(|x| [1.0, *x, 2.0 * x]).collect();
    let mut c3 = [0.0; 3];
    let mut s3 = [0.0; 3];
    let s = unsafe { cmom_ols(y.as_ptr(), collinear.as_ptr(), 5, 3, -1, c3.as_mut_ptr(), s3.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, CmomStatus::Failed);
    assert!(last_error().contains("collinear"), "{}", last_error());
}

#[test]
fn null_pointers_are_reported_not_dereferenced() {
    let mut out = 0.0;
    let s = unsafe { cmom_window_return(ptr::null(), 3, 3, 3, 1, &mut out) };
    assert_eq!(s, CmomStatus::NullPointer);
    assert!(last_error().contains("returns"));
    let s = unsafe { cmom_study_run(ptr::null(), c("all").as_ptr(), ptr::null_mut()) };
    assert_eq!(s, CmomStatus::NullPointer);
    unsafe {
        cmom_panel_free(ptr::null_mut());
        cmom_study_free(ptr::null_mut());
        cmom_string_free(ptr::null_mut());
    }
}

#[test]
fn windows_buckets_and_sharpe() {
    let r = [0.1, -0.05, 0.02, 0.03];
    let mut w = 0.0;
    assert_eq!(unsafe { cmom_window_return(r.as_ptr(), 4, 3, 3, 1, &mut w) }, CmomStatus::Ok);
    assert!((w - (1.1 * 0.95 * 1.02 - 1.0)).abs() < 1e-15);
    assert_eq!(unsafe { cmom_window_return(r.as_ptr(), 4, 9, 3, 1, &mut w) }, CmomStatus::InvalidArgument);
    assert_eq!(unsafe { cmom_window_return(r.as_ptr(), 4, 3, 1, 3, &mut w) }, CmomStatus::InvalidArgument);

    let values = [5.0, 1.0, 3.0, 2.0, 4.0];
    let mut th = [0.0; 4];
    assert_eq!(unsafe { cmom_breakpoints(values.as_ptr(), 5, 5, th.as_mut_ptr()) }, CmomStatus::Ok);
    for (got, want) in th.iter().zip([1.8, 2.6, 3.4, 4.2]) {
        assert!((got - want).abs() < 1e-12, "{th:?}");
    }
    let mut b = 0usize;
    assert_eq!(unsafe { cmom_assign_bucket(th.as_ptr(), 4, th[1], &mut b) }, CmomStatus::Ok);
    assert_eq!(b, 2, "ties go to the lower bucket");

    let flat = [1.0; 6];
    assert_eq!(
        unsafe { cmom_breakpoints(flat.as_ptr(), 6, 5, th.as_mut_ptr()) },
        CmomStatus::DegenerateBreakpoints
    );

    let series = [0.02, -0.01, 0.03, 0.0];
    let mut sr = 0.0;
    assert_eq!(unsafe { cmom_sharpe(series.as_ptr(), 4, CmomFrequency::Monthly, &mut sr) }, CmomStatus::Ok);
    let mean = 0.01;
    let sd = ((0.01f64.powi(2) + 0.02f64.powi(2) + 0.02f64.powi(2) + 0.01f64.powi(2)) / 3.0).sqrt();
    assert!((sr - mean / sd * 12f64.sqrt()).abs() < 1e-12);
    assert_eq!(
        unsafe { cmom_sharpe(flat.as_ptr(), 6, CmomFrequency::Daily, &mut sr) },
        CmomStatus::InvalidArgument
    );
}

#[test]
fn panel_handle_and_study_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let dir = c(data.to_str().unwrap());
    let s = unsafe { cmom_synth_write(c("n_firms = 40\nn_periods = 36\nseed = 9\n").as_ptr(), dir.as_ptr()) };
    assert_eq!(s, CmomStatus::Ok, "{}", last_error());

    let mut panel = ptr::null_mut();
    let path = c(data.join("returns.csv").to_str().unwrap());
    assert_eq!(unsafe { cmom_panel_open(path.as_ptr(), &mut panel) }, CmomStatus::Ok);
    let (mut firms, mut obs) = (0usize, 0usize);
    assert_eq!(unsafe { cmom_panel_shape(panel, &mut firms, &mut obs) }, CmomStatus::Ok);
    assert_eq!((firms, obs), (40, 40 * 36));
    let mut g = 0.0;
    let s = unsafe { cmom_panel_compound(panel, c("F0001").as_ptr(), c("2000-01").as_ptr(), c("2000-03").as_ptr(), &mut g) };
    assert_eq!(s, CmomStatus::Ok, "{}", last_error());
    assert!(g > -1.0);
    let s = unsafe { cmom_panel_compound(panel, c("NOPE").as_ptr(), c("2000-01").as_ptr(), c("2000-03").as_ptr(), &mut g) };
    assert_eq!(s, CmomStatus::InvalidArgument);
    unsafe { cmom_panel_free(panel) };

    let missing = c(tmp.path().join("nothing.csv").to_str().unwrap());
    let mut p2 = ptr::null_mut();
    assert_eq!(unsafe { cmom_panel_open(missing.as_ptr(), &mut p2) }, CmomStatus::Io);
    assert!(p2.is_null());

    let mut study = ptr::null_mut();
    assert_eq!(unsafe { cmom_study_new(c("bukets = 3").as_ptr(), &mut study) }, CmomStatus::Config);
    assert_eq!(unsafe { cmom_study_new(c("buckets = 5").as_ptr(), &mut study) }, CmomStatus::Ok);
    let out = c(tmp.path().join("out").to_str().unwrap());
    assert_eq!(unsafe { cmom_study_set_dirs(study, dir.as_ptr(), out.as_ptr()) }, CmomStatus::Ok);
    assert_eq!(unsafe { cmom_study_run(study, c("tables").as_ptr(), ptr::null_mut()) }, CmomStatus::Config);

    let mut json: *mut c_char = ptr::null_mut();
    let s = unsafe { cmom_study_run(study, c("sort").as_ptr(), &mut json) };
    assert_eq!(s, CmomStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { cmom_string_free(json) };
    let reports: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(reports[0]["command"], "sort");
    assert!(tmp.path().join("out/sort.md").is_file());
    unsafe { cmom_study_free(study) };
}

#[test]
fn version_matches_engine() {
    let v = unsafe { CStr::from_ptr(cmom_version()) }.to_str().unwrap();
    assert_eq!(v, cmom::VERSION);
}

const EXPORTS: [&str; 17] = [
    "cmom_version",
    "cmom_last_error",
    "cmom_string_free",
    "cmom_ols",
    "cmom_window_return",
    "cmom_breakpoints",
    "cmom_assign_bucket",
    "cmom_sharpe",
    "cmom_panel_open",
    "cmom_panel_shape",
    "cmom_panel_compound",
    "cmom_panel_free",
    "cmom_study_new",
    "cmom_study_set_dirs",
    "cmom_study_run",
    "cmom_study_free",
    "cmom_synth_write",
];

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/cmom.h")).unwrap();
    for f in EXPORTS {
        assert!(header.contains(&format!("{f}(")), "{f} missing from cmom.h");
    }
    for t in ["typedef struct CmomPanel CmomPanel;", "typedef struct CmomStudy CmomStudy;", "CMOM_STATUS_DEGENERATE_BREAKPOINTS = 5"] {
        assert!(header.contains(t), "{t}");
    }
}

/// Directory holding this build's `libcmom_ffi.a`.
fn artifact_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?.to_path_buf();
    dir.join("libcmom_ffi.a").is_file().then_some(dir)
}

#[test]
fn c_program_links_against_the_static_library() {
    let Some(lib_dir) = artifact_dir() else {
        eprintln!("libcmom_ffi.a not found next to the test binary; skipping");
        return;
    };
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(lib_dir.join("libcmom_ffi.a"))
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).arg(tmp.path().join("data")).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("slope 0.885714"), "{stdout}");
    assert!(stdout.contains("window 0.0659000000"), "{stdout}");
    assert!(stdout.contains("report ok"), "{stdout}");
    assert!(Path::new(&tmp.path().join("data/out/summary.md")).is_file());
}
