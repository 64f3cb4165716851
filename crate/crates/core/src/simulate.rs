//! Data from known GT models.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)` (the
//! `rand_chacha` stream), one observation at a time: first the covariates in
//! column order as `U[lo, hi)`, then `e ~ N(0, 1)` (`rand_distr::StandardNormal`),
//! then any extra draws the kind needs. The outcome is `y = h(x, e)`, the
//! inverse of `y ↦ b₀′T(x, y)`.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bspline::equispaced;
use crate::dictionary::{Dictionary, DictionarySpec, Sample};
use crate::drf::{solve_level, tail_slope, transform};
use crate::error::{GtrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DgpKind {
    /// `y ~ N(0, 1)` independent of `x ~ U[0, 1]^covariates`.
    BaselineGaussian {
        #[serde(default = "one")]
        covariates: usize,
    },
    /// `x ~ U[0, 1]`, `β₁(x) = −1 − x`, `β₂(x) = 1 + 0.5x`, so
    /// `y = (e + 1 + x) / (1 + 0.5x)`.
    LinearLocationScale,
    /// `b₀′T(x, y) = e` for a fixed dictionary (explicit knots, no
    /// standardization) and `x` uniform on the given box.
    CustomB0 {
        dictionary: DictionarySpec,
        b0: Vec<f64>,
        x_ranges: Vec<(f64, f64)>,
    },
    /// `x ~ U[0, 1]`, `y = x + s · separation + noise_sd · e`, `s = ±1` with
    /// equal probability. Not a GT model with a linear-linear dictionary.
    BimodalMisspec {
        #[serde(default = "two")]
        separation: f64,
        #[serde(default = "half")]
        noise_sd: f64,
    },
}

fn one() -> usize {
    1
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub kind: DgpKind,
}

/// True raw-unit coefficients of the linear-location-scale design,
/// ordered `(1·1, 1·y, x·1, x·y)`.
pub const LOCATION_SCALE_B0: [f64; 4] = [-1.0, 1.0, -1.0, 0.5];

/// Analytic conditional CDF of the linear-location-scale design.
pub fn location_scale_cdf(x: f64, y: f64) -> f64 {
    crate::normal::cdf(-1.0 - x + (1.0 + 0.5 * x) * y)
}

/// Analytic conditional quantile of the linear-location-scale design.
pub fn location_scale_quantile(x: f64, u: f64) -> f64 {
    (crate::normal::quantile(u) + 1.0 + x) / (1.0 + 0.5 * x)
}

/// The true coefficients for kinds that have them, in the fixed dictionary's
/// coordinates (raw units).
pub fn true_b0(spec: &DgpSpec) -> Option<Vec<f64>> {
    match &spec.kind {
        DgpKind::BaselineGaussian { covariates } => {
            let mut b = vec![0.0; 2 * (1 + covariates)];
            b[1] = 1.0;
            Some(b)
        }
        DgpKind::LinearLocationScale => Some(LOCATION_SCALE_B0.to_vec()),
        DgpKind::CustomB0 { b0, .. } => Some(b0.clone()),
        DgpKind::BimodalMisspec { .. } => None,
    }
}

/// Checks `b₀′t > 0` over a grid of the covariate box and the outcome knot
/// span, plus a positive tail slope, which together make `h` well defined.
pub fn check_feasible(dict: &Dictionary, b0: &DVector<f64>, x_ranges: &[(f64, f64)]) -> Result<()> {
    let p = x_ranges.len();
    let per_axis = match p {
        0 => 1,
        1 => 201,
        2 => 41,
        _ => 5,
    };
    let axes: Vec<Vec<f64>> = x_ranges.iter().map(|&(lo, hi)| equispaced(lo, hi, per_axis)).collect();
    let ys = dict.y_knot_span().map(|(lo, hi)| equispaced(lo, hi, 201)).unwrap_or_else(|| vec![0.0]);
    let total = per_axis.pow(p as u32);
    let mut x = vec![0.0; p];
    for flat in 0..total {
        let mut r = flat;
        for c in 0..p {
            x[c] = axes[c][r % per_axis];
            r /= per_axis;
        }
        let slope = tail_slope(dict, b0, &x)?;
        if !(slope > 0.0) {
            return Err(GtrError::InfeasibleDgp(format!("β₂(x) = {slope} ≤ 0 at x = {x:?}")));
        }
        for &y in &ys {
            let (_, dg) = transform(dict, b0, &x, y)?;
            if !(dg > 0.0) {
                return Err(GtrError::InfeasibleDgp(format!("b₀′t = {dg} ≤ 0 at x = {x:?}, y = {y}")));
            }
        }
    }
    Ok(())
}

fn uniform_row(rng: &mut ChaCha8Rng, ranges: &[(f64, f64)]) -> Vec<f64> {
    ranges.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
}

pub fn generate(spec: &DgpSpec) -> Result<Sample> {
    if spec.n == 0 {
        return Err(GtrError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut y = Vec::with_capacity(spec.n);
    let mut x = Vec::with_capacity(spec.n);
    match &spec.kind {
        DgpKind::BaselineGaussian { covariates } => {
            let ranges = vec![(0.0, 1.0); *covariates];
            for _ in 0..spec.n {
                x.push(uniform_row(&mut rng, &ranges));
                y.push(rng.sample::<f64, _>(StandardNormal));
            }
        }
        DgpKind::LinearLocationScale => {
            for _ in 0..spec.n {
                let xi = rng.random::<f64>();
                let e: f64 = rng.sample(StandardNormal);
                x.push(vec![xi]);
                y.push((e + 1.0 + xi) / (1.0 + 0.5 * xi));
            }
        }
        DgpKind::CustomB0 { dictionary, b0, x_ranges } => {
            let dict = Dictionary::fixed(dictionary, x_ranges.len())?;
            if b0.len() != dict.jk() {
                return Err(GtrError::DimensionMismatch { expected: dict.jk(), got: b0.len() });
            }
            if x_ranges.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                return Err(GtrError::InfeasibleDgp("covariate ranges must be finite with lo < hi".into()));
            }
            let b0 = DVector::from_column_slice(b0);
            check_feasible(&dict, &b0, x_ranges)?;
            let start = dict.standardization().y_median;
            for _ in 0..spec.n {
                let xi = uniform_row(&mut rng, x_ranges);
                let e: f64 = rng.sample(StandardNormal);
                y.push(solve_level(&dict, &b0, &xi, e, start)?);
                x.push(xi);
            }
        }
        DgpKind::BimodalMisspec { separation, noise_sd } => {
            if !(*noise_sd > 0.0) {
                return Err(GtrError::InfeasibleDgp("noise_sd must be positive".into()));
            }
            for _ in 0..spec.n {
                let xi = rng.random::<f64>();
                let e: f64 = rng.sample(StandardNormal);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x.push(vec![xi]);
                y.push(xi + s * separation + noise_sd * e);
            }
        }
    }
    Sample::new(y, x)
}

/// Synthetic daily-temperature-like series. The constants are our own
/// calibration, chosen to give a persistent series whose next-day law is
/// unimodal after cool days and bimodal after hot ones.
///
/// ```text
/// regular day:  y_t = mean + phi (y_{t−1} − mean) + sd ε
/// cool change:  y_t = change_mean + change_sd ε
/// P(cool change | y_{t−1}) = 1 / (1 + exp(−(y_{t−1} − change_center) / change_scale))
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelbourneSpec {
    pub length: usize,
    pub seed: u64,
    pub mean: f64,
    pub phi: f64,
    pub sd: f64,
    pub change_mean: f64,
    pub change_sd: f64,
    pub change_center: f64,
    pub change_scale: f64,
    pub burn_in: usize,
}

impl Default for MelbourneSpec {
    fn default() -> Self {
        Self {
            length: 3650,
            seed: 1,
            mean: 20.0,
            phi: 0.7,
            sd: 3.0,
            change_mean: 16.0,
            change_sd: 1.5,
            change_center: 24.0,
            change_scale: 2.0,
            burn_in: 200,
        }
    }
}

/// Draw order per step: one uniform (regime), then one standard normal.
pub fn melbourne_like(spec: &MelbourneSpec) -> Result<Vec<f64>> {
    if spec.length < 2 {
        return Err(GtrError::InvalidArgument("series length must be at least 2".into()));
    }
    if !(spec.phi.abs() < 1.0) || !(spec.sd > 0.0) || !(spec.change_sd > 0.0) || !(spec.change_scale > 0.0) {
        return Err(GtrError::InvalidArgument(format!("invalid series calibration: {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prev = spec.mean;
    let mut out = Vec::with_capacity(spec.length);
    for t in 0..spec.burn_in + spec.length {
        let p_change = 1.0 / (1.0 + (-(prev - spec.change_center) / spec.change_scale).exp());
        let change = rng.random::<f64>() < p_change;
        let e: f64 = rng.sample(StandardNormal);
        let next = if change {
            spec.change_mean + spec.change_sd * e
        } else {
            spec.mean + spec.phi * (prev - spec.mean) + spec.sd * e
        };
        if t >= spec.burn_in {
            out.push(next);
        }
        prev = next;
    }
    Ok(out)
}

/// `(y_t, y_{t−1})` pairs: outcome `y_t`, single covariate `y_{t−1}`.
pub fn lag_pairs(series: &[f64]) -> Result<Sample> {
    if series.len() < 2 {
        return Err(GtrError::EmptyData);
    }
    let y = series[1..].to_vec();
    let x = series[..series.len() - 1].iter().map(|&v| vec![v]).collect();
    Sample::new(y, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    pub level: f64,
    pub quantile: f64,
}

/// Empirical conditional quantiles of `y` within equal-width bins of the
/// first covariate. Empty bins are skipped.
pub fn quantile_fan(sample: &Sample, bins: usize, levels: &[f64]) -> Result<Vec<FanRow>> {
    if sample.num_covariates() == 0 || bins == 0 {
        return Err(GtrError::InvalidArgument("quantile fan needs a covariate and at least one bin".into()));
    }
    let xs: Vec<f64> = sample.x.iter().map(|r| r[0]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (xi, yi) in xs.iter().zip(&sample.y) {
        let b = if width > 0.0 { (((xi - lo) / width) as usize).min(bins - 1) } else { 0 };
        groups[b].push(*yi);
    }
    let mut rows = Vec::new();
    for (b, g) in groups.iter_mut().enumerate() {
        if g.is_empty() {
            continue;
        }
        g.sort_by(f64::total_cmp);
        for &u in levels {
            rows.push(FanRow {
                bin_lo: lo + width * b as f64,
                bin_hi: lo + width * (b + 1) as f64,
                count: g.len(),
                level: u,
                quantile: empirical_quantile(g, u),
            });
        }
    }
    Ok(rows)
}

/// Linear interpolation between order statistics (type 7).
fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * u.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Writes a sample as CSV with header `y, x1, …, xp` (or `y, y_lag` names
/// supplied by the caller).
pub fn write_sample_csv<W: Write>(sample: &Sample, names: &[String], out: W) -> Result<()> {
    let p = sample.num_covariates();
    if names.len() != p + 1 {
        return Err(GtrError::DimensionMismatch { expected: p + 1, got: names.len() });
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| GtrError::InvalidArgument(format!("csv write failed: {e}"));
    w.write_record(names).map_err(io)?;
    for (yi, xi) in sample.y.iter().zip(&sample.x) {
        let mut rec = Vec::with_capacity(p + 1);
        rec.push(format!("{yi:?}"));
        rec.extend(xi.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| GtrError::InvalidArgument(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Default column names `y, x1, …, xp`.
pub fn default_names(p: usize) -> Vec<String> {
    std::iter::once("y".to_string()).chain((1..=p).map(|c| format!("x{c}"))).collect()
}
