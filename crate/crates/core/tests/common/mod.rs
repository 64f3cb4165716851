#![allow(dead_code)]

use gtreg::dictionary::{build_dictionary, DesignMatrices, Dictionary, DictionarySpec, Sample};
use gtreg::objective;
use gtreg::simulate::{generate, DgpKind, DgpSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One small representative of each dictionary class.
pub fn classes() -> Vec<DictionarySpec> {
    vec![
        DictionarySpec::linear_linear(),
        DictionarySpec::spline_x(6),
        DictionarySpec::spline_y(5, 2),
        DictionarySpec::spline_spline(6, 5, 2),
    ]
}

pub fn location_scale(n: usize, seed: u64) -> Sample {
    generate(&DgpSpec { n, seed, kind: DgpKind::LinearLocationScale }).unwrap()
}

pub fn baseline(n: usize, seed: u64) -> Sample {
    generate(&DgpSpec { n, seed, kind: DgpKind::BaselineGaussian { covariates: 1 } }).unwrap()
}

pub fn bimodal(n: usize, seed: u64) -> Sample {
    generate(&DgpSpec { n, seed, kind: DgpKind::BimodalMisspec { separation: 2.0, noise_sd: 0.5 } }).unwrap()
}

pub fn design(spec: &DictionarySpec, sample: &Sample) -> (Dictionary, DesignMatrices) {
    build_dictionary(spec, sample).unwrap()
}

/// Canonical point plus a Gaussian perturbation, shrunk until every `η_i`
/// is at least `floor`.
pub fn random_feasible(dict: &Dictionary, d: &DesignMatrices, rng: &mut ChaCha8Rng, scale: f64, floor: f64) -> DVector<f64> {
    let base = dict.canonical_point();
    let delta = DVector::from_fn(dict.jk(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let mut t = 1.0;
    loop {
        let b = &base + &delta * t;
        let eta = &d.slope * &b;
        if eta.min() >= floor {
            return b;
        }
        t *= 0.5;
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central-difference gradient of `f` with per-coordinate step `h (1 + |b_l|)`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, b: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(b.len(), |l, _| {
        let step = h * (1.0 + b[l].abs());
        let mut up = b.clone();
        let mut dn = b.clone();
        up[l] += step;
        dn[l] -= step;
        (f(&up) - f(&dn)) / (2.0 * step)
    })
}

/// Central-difference Jacobian of a vector function (column `l` is `∂g/∂b_l`).
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, b: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let p = b.len();
    let mut out = DMatrix::zeros(p, p);
    for l in 0..p {
        let step = h * (1.0 + b[l].abs());
        let mut up = b.clone();
        let mut dn = b.clone();
        up[l] += step;
        dn[l] -= step;
        out.set_column(l, &((g(&up) - g(&dn)) / (2.0 * step)));
    }
    out
}

pub fn rel_err(approx: &DVector<f64>, exact: &DVector<f64>) -> f64 {
    (approx - exact).amax() / exact.amax().max(1.0)
}

pub fn rel_err_mat(approx: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (approx - exact).amax() / exact.amax().max(1.0)
}

/// `Q_n` written out from its definition, independent of the library's evaluation.
pub fn q_oracle(b: &DVector<f64>, d: &DesignMatrices) -> f64 {
    let n = d.n() as f64;
    let mut s = 0.0;
    for i in 0..d.n() {
        let e: f64 = d.level.row(i).iter().zip(b.iter()).map(|(t, c)| t * c).sum();
        let eta: f64 = d.slope.row(i).iter().zip(b.iter()).map(|(t, c)| t * c).sum();
        s += -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * e * e + eta.ln();
    }
    s / n
}

pub fn score(b: &DVector<f64>, d: &DesignMatrices) -> DVector<f64> {
    objective::evaluate(b, d).unwrap().score
}

/// Standard normal CDF through the error function of `libm`.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance of a sample from U(0, 1).
pub fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
