//! Structural invariants checked over random data, dictionaries and coefficient vectors.

mod common;

use common::*;
use gtreg::dictionary::{build_dictionary, DictionarySpec, Sample};
use gtreg::drf::{default_u_grid, default_x_grid, DrfEvaluator, DrfKind};
use gtreg::duality::{check_lasso_kkt, dual_scores, recover_dual};
use gtreg::inference::{sandwich, sandwich_on, sandwich_penalized};
use gtreg::objective;
use gtreg::simulate::{generate, DgpKind, DgpSpec};
use gtreg::solver::{fit_adaptive_lasso, fit_ml, SolverConfig};
use nalgebra::DVector;
use proptest::prelude::*;

fn class(i: usize) -> DictionarySpec {
    classes()[i % 4].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonical_point_is_feasible_everywhere(ci in 0usize..4, seed in 0u64..1000, x in -50.0f64..50.0, y in -1e6f64..1e6) {
        let sample = location_scale(200, seed);
        let (dict, d) = design(&class(ci), &sample);
        let b = dict.canonical_point() * 2.5;
        prop_assert!((&d.slope * &b).min() > 0.0);
        let (_, t) = dict.eval(&[x], y).unwrap();
        prop_assert!(t.dot(&b) > 0.0);
    }

    #[test]
    fn level_is_differentiable_with_slope_as_derivative(ci in 0usize..4, seed in 0u64..1000, x in -2.0f64..2.0, y in -3.0f64..3.0) {
        let sample = location_scale(200, seed);
        let (dict, _) = design(&class(ci), &sample);
        let h = 1e-6;
        let up = dict.eval_level(&[x], y + h).unwrap();
        let dn = dict.eval_level(&[x], y - h).unwrap();
        let fd = (up - dn) / (2.0 * h);
        let exact = dict.eval_slope(&[x], y).unwrap();
        prop_assert!(rel_err(&fd, &exact) <= 1e-6, "{} vs {}", fd, exact);
    }

    #[test]
    fn spline_spline_tails_are_exactly_affine(seed in 0u64..1000, x in -1.5f64..1.5) {
        let sample = location_scale(300, seed);
        let (dict, d) = design(&DictionarySpec::spline_spline(6, 5, 2), &sample);
        let mut r = rng(seed);
        let b = random_feasible(&dict, &d, &mut r, 0.3, 1e-3);
        let beta2: f64 = {
            let w = dict.w_values(&[x]).unwrap();
            (0..dict.k()).map(|k| w[k] * b[dict.index(k, 1)]).sum()
        };
        for y0 in [1e10, -1e10] {
            let g = |y: f64| dict.eval_level(&[x], y).unwrap().dot(&b);
            // three equispaced points far out: second difference vanishes, first is β₂·h
            let h = 1e3;
            let (a, m, c) = (g(y0 - h), g(y0), g(y0 + h));
            // rounding of values near |g| ≈ 1e10 only
            prop_assert!(((c - m) - (m - a)).abs() <= 16.0 * f64::EPSILON * (a.abs() + m.abs() + c.abs()));
            prop_assert!((((c - a) / (2.0 * h)) - beta2).abs() <= 1e-6 * (1.0 + beta2.abs()));
            let slope = dict.eval_slope(&[x], y0).unwrap().dot(&b);
            prop_assert!((slope - beta2).abs() <= 1e-13 * (1.0 + beta2.abs()));
        }
    }

    #[test]
    fn log_likelihood_is_concave(ci in 0usize..4, seed in 0u64..1000, lam in 0.05f64..0.95) {
        let sample = location_scale(300, seed);
        let (dict, d) = design(&class(ci), &sample);
        let mut r = rng(seed ^ 0xabc);
        let b1 = random_feasible(&dict, &d, &mut r, 0.5, 1e-3);
        let b2 = random_feasible(&dict, &d, &mut r, 0.5, 1e-3);
        let mid = &b1 * lam + &b2 * (1.0 - lam);
        let q = |b: &DVector<f64>| objective::value(b, &d).unwrap();
        prop_assert!(q(&mid) >= lam * q(&b1) + (1.0 - lam) * q(&b2) - 1e-12);
    }

    #[test]
    fn value_matches_definition_and_hessian_matches_score_differences(ci in 0usize..4, seed in 0u64..1000) {
        let sample = location_scale(150, seed);
        let (dict, d) = design(&class(ci), &sample);
        let mut r = rng(seed + 7);
        let b = random_feasible(&dict, &d, &mut r, 0.3, 0.05);
        let rep = objective::evaluate(&b, &d).unwrap();
        prop_assert!((rep.value - q_oracle(&b, &d)).abs() <= 1e-12 * (1.0 + rep.value.abs()));
        let jac = fd_jacobian(|v| score(v, &d), &b, 1e-6);
        prop_assert!(rel_err_mat(&jac, &rep.hessian) <= 1e-5);
    }

    #[test]
    fn likelihood_falls_to_minus_infinity_at_the_boundary(ci in 0usize..4, seed in 0u64..1000) {
        let sample = location_scale(150, seed);
        let (dict, d) = design(&class(ci), &sample);
        let b0 = dict.canonical_point();
        // ray toward a direction that pushes one η_i through zero
        let mut r = rng(seed + 11);
        let dir = random_feasible(&dict, &d, &mut r, 1.0, 1e-3) - &b0 - dict.canonical_point() * 1.5;
        let eta0 = &d.slope * &b0;
        let deta = &d.slope * &dir;
        let t_max = eta0.iter().zip(deta.iter()).filter(|(_, s)| **s < 0.0).map(|(e, s)| -e / s).fold(f64::INFINITY, f64::min);
        prop_assume!(t_max.is_finite());
        let mut last = f64::INFINITY;
        for k in 1..=5 {
            let gap = 10f64.powi(-2 * k);
            let q = objective::value(&(&b0 + &dir * (t_max * (1.0 - gap))), &d).unwrap();
            prop_assert!(q < last, "{q} !< {last}");
            last = q;
        }
        prop_assert!(objective::value(&(&b0 + &dir * t_max * 1.01), &d).is_err() || !objective::in_domain(&(&b0 + &dir * t_max * 1.01), &d).unwrap());
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), n in 1usize..300) {
        for kind in [DgpKind::LinearLocationScale, DgpKind::BaselineGaussian { covariates: 2 }, DgpKind::BimodalMisspec { separation: 2.0, noise_sd: 0.5 }] {
            let spec = DgpSpec { n, seed, kind };
            prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_duality_bounds_every_feasible_point(ci in 0usize..4, seed in 0u64..1000) {
        let sample = location_scale(400, seed);
        let (dict, d) = design(&class(ci), &sample);
        let fit = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
        prop_assume!(fit.converged);
        let cert = recover_dual(&fit.b_hat, &d).unwrap();
        let mut r = rng(seed + 3);
        for _ in 0..5 {
            let b = random_feasible(&dict, &d, &mut r, 0.5, 1e-4);
            prop_assert!(cert.dual_value >= d.n() as f64 * q_oracle(&b, &d) - 1e-9);
        }
    }

    #[test]
    fn uniform_weight_box_is_the_sup_norm_ball(seed in 0u64..1000, lambda in 0.5f64..40.0) {
        let sample = location_scale(400, seed);
        let (dict, d) = design(&DictionarySpec::spline_x(6), &sample);
        let mut first = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
        prop_assume!(first.converged);
        // weights 1/|b̂_l| = 1 everywhere penalized
        first.b_hat = first.b_hat.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let unpen = dict.unpenalized();
        let mut pf = fit_adaptive_lasso(&d, &SolverConfig::default(), &fit_ml(&dict, &d, &SolverConfig::default()).unwrap(), lambda, &unpen).unwrap();
        pf.weights = DVector::from_fn(dict.jk(), |l, _| if unpen.contains(&l) { 0.0 } else { 1.0 });
        let (u, v) = gtreg::duality::dual_point(&pf.b_al, &d).unwrap();
        let scores = dual_scores(&d, &u, &v);
        let report = check_lasso_kkt(&pf, &d, 0.0).unwrap();
        let sup = (0..dict.jk()).filter(|l| !unpen.contains(l)).map(|l| scores[l].abs()).fold(0.0, f64::max);
        let box_holds = report.residuals.iter().zip(&report.bounds).enumerate().filter(|(l, _)| !unpen.contains(l)).all(|(_, (r, b))| r <= b);
        prop_assert_eq!(box_holds, sup <= lambda);
        let bounds_ok = report.bounds.iter().enumerate().all(|(l, b)| if unpen.contains(&l) { *b == 0.0 } else { *b == lambda });
        prop_assert!(bounds_ok);
    }

    #[test]
    fn drf_round_trip_no_crossing_and_density_consistency(ci in 0usize..4, seed in 0u64..1000) {
        let sample = location_scale(600, seed);
        let (dict, d) = design(&class(ci), &sample);
        let fit = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
        prop_assume!(fit.converged);
        let eval = DrfEvaluator::new(dict.clone(), fit.b_hat.clone(), None).unwrap();
        let xs = default_x_grid(&dict, &d, 9);
        let us = default_u_grid();
        let qgm = eval.qgm_check(&xs, &us).unwrap();
        prop_assume!(qgm.passed);
        let st = dict.standardization().clone();
        for x in &xs {
            let mut prev = f64::NEG_INFINITY;
            for &u in &us {
                let q = eval.quantile(x, u).unwrap().value;
                prop_assert!(q > prev);
                prev = q;
                prop_assert!((eval.cdf(x, q).unwrap().value - u).abs() <= 1e-8);
                // central difference of the CDF in standardized units, h = 1e-5
                let h = 1e-5 * st.y_sd;
                let fd = (eval.cdf(x, q + h).unwrap().value - eval.cdf(x, q - h).unwrap().value) / (2.0 * h);
                let pdf = eval.pdf(x, q).unwrap().value;
                prop_assert!((fd - pdf).abs() <= 1e-5 * pdf, "fd {fd} pdf {pdf}");
            }
        }
    }

    #[test]
    fn bands_do_not_depend_on_standardization(seed in 0u64..1000) {
        let sample = location_scale(800, seed);
        let mut rows = Vec::new();
        for on in [true, false] {
            let spec = DictionarySpec::linear_linear().with_standardize(on);
            let (dict, d) = build_dictionary(&spec, &sample).unwrap();
            let fit = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
            prop_assume!(fit.converged);
            let cov = sandwich(&fit, &d).unwrap().cov;
            let eval = DrfEvaluator::new(dict, fit.b_hat.clone(), Some(cov)).unwrap();
            let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
            let mut r = eval.band_grid(&xs, &[0.1, 0.5, 0.9], DrfKind::Quantile, 0.95).unwrap();
            r.extend(eval.band_grid(&xs, &[0.0, 1.0, 2.0], DrfKind::Cdf, 0.9).unwrap());
            r.extend(eval.band_grid(&xs, &[0.0, 1.0, 2.0], DrfKind::Pdf, 0.9).unwrap());
            rows.push(r);
        }
        for (a, b) in rows[0].iter().zip(&rows[1]) {
            for (p, q) in [(a.estimate, b.estimate), (a.lower, b.lower), (a.upper, b.upper)] {
                prop_assert!((p - q).abs() <= 1e-6 * (1.0 + p.abs()), "{p} vs {q}");
            }
        }
    }

    #[test]
    fn dense_penalized_fit_gets_the_full_sandwich(seed in 0u64..1000) {
        let sample = location_scale(800, seed);
        let (dict, d) = design(&DictionarySpec::linear_linear(), &sample);
        let first = fit_ml(&dict, &d, &SolverConfig::default()).unwrap();
        let pf = fit_adaptive_lasso(&d, &SolverConfig::default(), &first, 1e-3, &dict.unpenalized()).unwrap();
        prop_assume!(pf.active_set.len() == dict.jk() && pf.converged);
        let block = sandwich_penalized(&pf, &d).unwrap();
        let full = sandwich_on(&pf.b_al, &d, &(0..dict.jk()).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(block.cov, full.cov);
    }

    #[test]
    fn custom_b0_residuals_are_uniform_after_phi(seed in 0u64..1000) {
        let spec = gtreg::dictionary::DictionarySpec {
            w: gtreg::dictionary::BasisSpec::linear(),
            s_tilde: Some(gtreg::dictionary::BasisSpec::bspline(2, gtreg::dictionary::Knots::Explicit(vec![-2.0, -1.0, 0.0, 1.0, 2.0]))),
            standardize: false,
        };
        let b0 = vec![0.1, 0.8, 0.3, 0.5, 0.2, 0.1, 0.2, -0.1];
        let dgp = DgpSpec { n: 1000, seed, kind: DgpKind::CustomB0 { dictionary: spec.clone(), b0: b0.clone(), x_ranges: vec![(0.0, 1.0)] } };
        let sample: Sample = generate(&dgp).unwrap();
        let dict = gtreg::dictionary::Dictionary::fixed(&spec, 1).unwrap();
        let b = DVector::from_vec(b0);
        let u: Vec<f64> = sample.y.iter().zip(&sample.x).map(|(y, x)| phi(dict.eval_level(x, *y).unwrap().dot(&b))).collect();
        // 1% critical value of the KS statistic, asymptotic form
        prop_assert!(ks_uniform(u) < 1.628 / (1000f64).sqrt());
    }
}

#[test]
fn stein_score_at_truth_shrinks_like_root_n() {
    // mean absolute score at the canonical point over 40 baseline samples, per n
    let mean_norm = |n: usize| {
        let v: Vec<f64> = (0..40)
            .map(|s| {
                let sample = baseline(n, 1000 + s);
                let (dict, d) = design(&DictionarySpec::linear_linear().with_standardize(false), &sample);
                score(&dict.canonical_point(), &d).amax()
            })
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (a, b) = (mean_norm(500), mean_norm(8000));
    // a 16-fold sample increase should shrink it about 4-fold
    let ratio = a / b;
    assert!(ratio > 2.5 && ratio < 6.5, "ratio {ratio}");
}
