use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use gtreg::simulate::{generate, location_scale_cdf, location_scale_quantile, DgpKind, DgpSpec};
use gtreg_ffi::*;

fn location_scale(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let s = generate(&DgpSpec { n, seed, kind: DgpKind::LinearLocationScale }).unwrap();
    (s.y, s.x.into_iter().flatten().collect())
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gtreg_last_error()) }.to_string_lossy().into_owned()
}

fn fit(y: &[f64], x: &[f64], p: usize, spec: &str) -> (GtregStatus, *mut GtregModel) {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { gtreg_fit(y.as_ptr(), x.as_ptr(), y.len(), p, spec.as_ptr(), 1, &mut m) };
    (st, m)
}

#[test]
fn fit_evaluate_and_free() {
    let (y, x) = location_scale(3000, 5);
    let (st, m) = fit(&y, &x, 1, "linear-linear");
    assert_eq!(st, GtregStatus::Ok, "{}", last_error());
    assert!(!m.is_null());

    let mut summary = GtregFitSummary {
        n: 0,
        num_covariates: 0,
        num_coefficients: 0,
        converged: 0,
        qgm_passed: 0,
        repair_rounds: 0,
        score_norm: 0.0,
        loglik: 0.0,
        duality_gap: 0.0,
        dual_residual: 0.0,
    };
    assert_eq!(unsafe { gtreg_fit_summary(m, &mut summary) }, GtregStatus::Ok);
    assert_eq!((summary.n, summary.num_covariates, summary.num_coefficients), (3000, 1, 4));
    assert_eq!(summary.converged, 1);
    assert!(summary.score_norm <= 1e-8);

    let mut b = [0.0; 4];
    assert_eq!(unsafe { gtreg_coefficients(m, 1, b.as_mut_ptr(), 4) }, GtregStatus::Ok);
    let truth = gtreg::simulate::LOCATION_SCALE_B0;
    for l in 0..4 {
        assert!((b[l] - truth[l]).abs() < 0.3, "{b:?}");
    }
    let mut short = [0.0; 3];
    assert_eq!(unsafe { gtreg_coefficients(m, 1, short.as_mut_ptr(), 3) }, GtregStatus::DataError);

    let xv = [0.4];
    let (mut q, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { gtreg_quantile(m, xv.as_ptr(), 1, 0.7, &mut q, &mut se) }, GtregStatus::Ok);
    assert!((q - location_scale_quantile(0.4, 0.7)).abs() < 4.0 * se, "{q} {se}");
    let (mut f, mut fse) = (0.0, 0.0);
    assert_eq!(unsafe { gtreg_cdf(m, xv.as_ptr(), 1, q, &mut f, &mut fse) }, GtregStatus::Ok);
    assert!((f - 0.7).abs() < 1e-8);
    assert!((location_scale_cdf(0.4, q) - 0.7).abs() < 0.05);
    let mut dens = 0.0;
    assert_eq!(unsafe { gtreg_pdf(m, xv.as_ptr(), 1, q, &mut dens, ptr::null_mut()) }, GtregStatus::Ok);
    assert!(dens > 0.0);

    assert_eq!(unsafe { gtreg_quantile(m, xv.as_ptr(), 1, 1.5, &mut q, &mut se) }, GtregStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    unsafe { gtreg_model_free(m) };
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let (y, x) = location_scale(50, 1);
    let mut m = ptr::null_mut();
    let st = unsafe { gtreg_fit(ptr::null(), x.as_ptr(), 50, 1, ptr::null(), 0, &mut m) };
    assert_eq!(st, GtregStatus::NullPointer);

    let (st, m) = fit(&y, &x, 1, "cubic");
    assert_eq!(st, GtregStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("cubic"));

    let mut bad = y.clone();
    bad[3] = f64::NAN;
    let (st, m) = fit(&bad, &x, 1, "linear-linear");
    assert_eq!(st, GtregStatus::DataError);
    assert!(m.is_null());

    assert_eq!(unsafe { gtreg_cdf(ptr::null(), x.as_ptr(), 1, 0.0, &mut 0.0, ptr::null_mut()) }, GtregStatus::NullPointer);
    unsafe { gtreg_model_free(ptr::null_mut()) };
}

#[test]
fn no_covariates() {
    let y: Vec<f64> = location_scale(400, 2).0;
    let mut m = ptr::null_mut();
    let st = unsafe { gtreg_fit(y.as_ptr(), ptr::null(), y.len(), 0, ptr::null(), 0, &mut m) };
    assert_eq!(st, GtregStatus::Ok, "{}", last_error());
    let mut v = 0.0;
    assert_eq!(unsafe { gtreg_cdf(m, ptr::null(), 0, 0.5, &mut v, ptr::null_mut()) }, GtregStatus::Ok);
    assert!(v > 0.0 && v < 1.0);
    unsafe { gtreg_model_free(m) };
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gtreg.h")).unwrap();
    for name in [
        "gtreg_fit",
        "gtreg_model_free",
        "gtreg_fit_summary",
        "gtreg_coefficients",
        "gtreg_cdf",
        "gtreg_pdf",
        "gtreg_quantile",
        "gtreg_last_error",
        "typedef struct GtregModel GtregModel",
        "GTREG_STATUS_QGM_FAILED = 5",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// The header compiles as C when a C compiler is around.
#[test]
fn header_is_valid_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, "#include \"gtreg.h\"\nint main(void) { GtregModel *m = 0; gtreg_model_free(m); return 0; }\n").unwrap();
    let out = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", concat!(env!("CARGO_MANIFEST_DIR"), "/include")))
        .arg(&src)
        .output();
    match out {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler; skipped"),
    }
}
