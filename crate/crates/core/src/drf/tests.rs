use super::*;
use crate::dictionary::{build_dictionary, DictionarySpec, Sample};
use crate::inference::sandwich;
use crate::simulate::{generate, location_scale_cdf, location_scale_quantile, DgpKind, DgpSpec};
use crate::solver::{fit_ml, SolverConfig};

fn sample(kind: DgpKind, n: usize, seed: u64) -> Sample {
    generate(&DgpSpec { n, seed, kind }).unwrap()
}

fn fitted(spec: &DictionarySpec, s: &Sample) -> (DrfEvaluator, DesignMatrices) {
    let (dict, d) = build_dictionary(spec, s).unwrap();
    let fit = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
    assert!(fit.converged);
    let cov = sandwich(&fit, &d).unwrap().cov;
    (DrfEvaluator::new(dict, fit.b_hat, Some(cov)).unwrap(), d)
}

fn identity() -> DrfEvaluator {
    let s = sample(DgpKind::LinearLocationScale, 200, 1);
    let (dict, _) = build_dictionary(&DictionarySpec::spline_spline(5, 4, 3), &s).unwrap();
    let b = dict.canonical_point();
    DrfEvaluator::new(dict, b, None).unwrap()
}

#[test]
fn identity_fit_is_standard_normal_in_standardized_units() {
    let ev = identity();
    let st = ev.dictionary().standardization().clone();
    for &x in &[0.1, 0.5, 0.9] {
        for &y in &[-1.0, 0.3, 2.5, 40.0] {
            let got = ev.cdf(&[x], y).unwrap().value;
            assert!((got - normal::cdf(st.y_to_std(y))).abs() < 1e-15);
        }
        let xs = st.x_to_std(&[x]);
        assert!(ev.quantile_std(&xs, 0.5).unwrap().abs() < 1e-12);
        assert!((ev.quantile_std(&xs, 0.975).unwrap() - 1.959963984540054).abs() < 1e-9);
    }
}

#[test]
fn formulas_at_zero_transform() {
    // fixed linear dictionary, b = canonical: ĝ = y, b′t = 1
    let dict = Dictionary::fixed(&DictionarySpec::linear_linear().with_standardize(false), 1).unwrap();
    let b = dict.canonical_point();
    let xi = DMatrix::from_fn(4, 4, |r, c| if r == c { 0.01 * (r + 1) as f64 } else { 0.001 });
    let ev = DrfEvaluator::new(dict.clone(), b, Some(xi.clone())).unwrap();
    let est = ev.cdf(&[2.0], 0.0).unwrap();
    assert_eq!(est.value, 0.5);
    let t = dict.eval_level(&[2.0], 0.0).unwrap();
    let expect = 0.3989422804014327 * t.dot(&(&xi * &t)).sqrt();
    assert!((est.se.unwrap() - expect).abs() < 1e-15);
    assert!((ev.pdf(&[2.0], 0.0).unwrap().value - 0.3989422804014327).abs() < 1e-16);
}

#[test]
fn round_trip_and_no_crossing_on_spline_fit() {
    let s = sample(DgpKind::BimodalMisspec { separation: 1.5, noise_sd: 0.7 }, 1500, 3);
    let (ev, d) = fitted(&DictionarySpec::spline_spline(5, 5, 3), &s);
    let xg = default_x_grid(ev.dictionary(), &d, 21);
    let ug = default_u_grid();
    let report = ev.qgm_check(&xg, &ug).unwrap();
    assert!(report.passed, "{} violations", report.violations.len());
    for x in &xg {
        let mut prev = f64::NEG_INFINITY;
        for &u in &ug {
            let q = ev.quantile(x, u).unwrap().value;
            assert!(q > prev);
            prev = q;
            assert!((ev.cdf(x, q).unwrap().value - u).abs() <= 1e-8);
        }
    }
}

#[test]
fn pdf_matches_cdf_difference_and_integrates_to_one() {
    let s = sample(DgpKind::BimodalMisspec { separation: 1.5, noise_sd: 0.7 }, 1500, 4);
    let (ev, _) = fitted(&DictionarySpec::spline_spline(5, 5, 3), &s);
    let st = ev.dictionary().standardization().clone();
    let h = 1e-5 * st.y_sd;
    for &x in &[0.2, 0.5, 0.8] {
        for &y in &[-2.0, -0.5, 0.4, 1.3, 3.0] {
            let fd = (ev.cdf(&[x], y + h).unwrap().value - ev.cdf(&[x], y - h).unwrap().value) / (2.0 * h);
            let pdf = ev.pdf(&[x], y).unwrap().value;
            assert!(((fd - pdf) / pdf).abs() < 1e-5, "fd {fd} pdf {pdf}");
        }
        // Simpson on the knot span in raw units plus exact affine tail mass
        let (lo, hi) = ev.dictionary().y_knot_span().unwrap();
        let (lo, hi) = (st.y_from_std(lo), st.y_from_std(hi));
        let m = 4000;
        let w = (hi - lo) / m as f64;
        let mut inner = 0.0;
        for i in 0..=m {
            let c = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            inner += c * ev.pdf(&[x], lo + w * i as f64).unwrap().value;
        }
        inner *= w / 3.0;
        let tails = ev.cdf(&[x], lo).unwrap().value + 1.0 - ev.cdf(&[x], hi).unwrap().value;
        assert!((inner + tails - 1.0).abs() < 1e-4, "mass {}", inner + tails);
    }
}

#[test]
fn affine_tails_solve_in_closed_form() {
    let s = sample(DgpKind::LinearLocationScale, 800, 5);
    let (ev, _) = fitted(&DictionarySpec::spline_spline(5, 4, 3), &s);
    let dict = ev.dictionary();
    let b = ev.coefficients();
    let (lo, hi) = dict.y_knot_span().unwrap();
    for &x in &[-1.0, 0.0, 1.2] {
        let (glo, _) = transform(dict, b, &[x], lo).unwrap();
        let (ghi, _) = transform(dict, b, &[x], hi).unwrap();
        for z in [glo - 3.0, glo - 0.1, ghi + 0.2, ghi + 2.5] {
            let closed = affine_tail_root(dict, b, &[x], z).unwrap().unwrap();
            assert!(closed < lo || closed > hi);
            let numeric = solve_level_numeric(dict, b, &[x], z, 0.0).unwrap();
            assert!((closed - numeric).abs() <= 1e-12, "{closed} vs {numeric}");
        }
        // second differences vanish beyond the span
        let g = |y: f64| transform(dict, b, &[x], y).unwrap().0;
        for y0 in [hi + 2.0, lo - 2.0] {
            assert!((g(y0 + 1.0) - 2.0 * g(y0) + g(y0 - 1.0)).abs() < 1e-12);
        }
        assert!(affine_tail_root(dict, b, &[x], 0.5 * (glo + ghi)).unwrap().is_none());
    }
}

#[test]
fn pdf_standard_error_matches_numeric_gradient() {
    let s = sample(DgpKind::LinearLocationScale, 600, 6);
    let (dict, d) = build_dictionary(&DictionarySpec::spline_spline(5, 4, 2), &s).unwrap();
    let fit = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
    let jk = dict.jk();
    let xi = DMatrix::from_fn(jk, jk, |r, c| 0.01 / (1.0 + (r as f64 - c as f64).abs()));
    let ev = DrfEvaluator::new(dict.clone(), fit.b_hat.clone(), Some(xi.clone())).unwrap();
    let (x, y) = (0.4, 1.1);
    let se = ev.pdf(&[x], y).unwrap().se.unwrap();
    let pdf_at = |b: &DVector<f64>| DrfEvaluator::new(dict.clone(), b.clone(), None).unwrap().pdf(&[x], y).unwrap().value;
    let mut grad = DVector::zeros(jk);
    for l in 0..jk {
        let h = 1e-6 * (1.0 + fit.b_hat[l].abs());
        let mut bp = fit.b_hat.clone();
        let mut bm = fit.b_hat.clone();
        bp[l] += h;
        bm[l] -= h;
        grad[l] = (pdf_at(&bp) - pdf_at(&bm)) / (2.0 * h);
    }
    let fd = grad.dot(&(&xi * &grad)).sqrt();
    assert!(((se - fd) / fd).abs() < 1e-5, "se {se} fd {fd}");
}

#[test]
fn qgm_reports_exactly_the_constructed_violations() {
    let dict = Dictionary::fixed(&DictionarySpec::linear_linear().with_standardize(false), 1).unwrap();
    // β₂(x) = 1 − 2x: positive below 0.5, zero at 0.5, negative above
    let b = DVector::from_vec(vec![0.0, 1.0, 0.0, -2.0]);
    let ev = DrfEvaluator::new(dict, b, None).unwrap();
    let xg: Vec<Vec<f64>> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&v| vec![v]).collect();
    let ug = vec![0.1, 0.5, 0.9];
    let report = ev.qgm_check(&xg, &ug).unwrap();
    assert!(!report.passed);
    let got: Vec<(f64, f64)> = report.violations.iter().map(|v| (v.x[0], v.u)).collect();
    let mut expect = Vec::new();
    for x in [0.5, 0.75, 1.0] {
        for &u in &ug {
            expect.push((x, u));
        }
    }
    assert_eq!(got, expect);
    assert!(report.violations.iter().filter(|v| v.x[0] == 0.5 && v.u != 0.5).all(|v| v.eta.is_none()));
}

#[test]
fn identity_and_location_scale_fits_pass_qgm() {
    let ev = identity();
    let xg: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64 / 10.0]).collect();
    assert!(ev.qgm_check(&xg, &default_u_grid()).unwrap().passed);
    let s = sample(DgpKind::LinearLocationScale, 2000, 7);
    let (ev, d) = fitted(&DictionarySpec::linear_linear(), &s);
    let xg = default_x_grid(ev.dictionary(), &d, 201);
    assert_eq!(xg.len(), 201);
    assert!(ev.qgm_check(&xg, &default_u_grid()).unwrap().passed);
}

#[test]
fn location_scale_drfs_within_three_standard_errors() {
    let s = sample(DgpKind::LinearLocationScale, 5000, 8);
    let (ev, _) = fitted(&DictionarySpec::linear_linear(), &s);
    for i in 0..10 {
        let x = 0.05 + 0.1 * i as f64;
        for j in 0..10 {
            let u = 0.05 + 0.1 * j as f64;
            let y = location_scale_quantile(x, u);
            let c = ev.cdf(&[x], y).unwrap();
            assert!((c.value - location_scale_cdf(x, y)).abs() <= 3.0 * c.se.unwrap(), "cdf at ({x}, {y})");
        }
        for &u in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let q = ev.quantile(&[x], u).unwrap();
            assert!((q.value - location_scale_quantile(x, u)).abs() <= 3.0 * q.se.unwrap(), "quantile at ({x}, {u})");
        }
    }
}

#[test]
fn bands_clip_count_and_require_covariance() {
    let s = sample(DgpKind::LinearLocationScale, 500, 9);
    let (ev, _) = fitted(&DictionarySpec::linear_linear(), &s);
    let xs: Vec<Vec<f64>> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&v| vec![v]).collect();
    let us: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let rows = ev.band_grid(&xs, &us, DrfKind::Quantile, 0.95).unwrap();
    assert_eq!(rows.len(), 5 * 19);
    let r = &rows[7];
    let se = ev.quantile(&r.x, r.grid).unwrap().se.unwrap();
    assert!((r.upper - r.estimate - 1.959963984540054 * se).abs() < 1e-12);

    let rows = ev.band_grid(&xs, &[-30.0, 30.0], DrfKind::Cdf, 0.95).unwrap();
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.lower) && (0.0..=1.0).contains(&r.upper)));

    let bare = DrfEvaluator::new(ev.dictionary().clone(), ev.coefficients().clone(), None).unwrap();
    assert_eq!(bare.band_grid(&xs, &us, DrfKind::Cdf, 0.95).unwrap_err(), GtrError::MissingCovariance);
}

#[test]
fn quantile_level_must_be_interior() {
    let ev = identity();
    assert!(ev.quantile(&[0.5], 0.0).is_err());
    assert!(ev.quantile(&[0.5], 1.0).is_err());
    assert!(matches!(ev.cdf(&[0.5, 1.0], 0.0), Err(GtrError::DimensionMismatch { .. })));
}
