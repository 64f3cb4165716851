//! Distributional regression functions of a fitted GT model.
//!
//! With `ĝ(y, x) = b′T(x, y)`:
//!
//! ```text
//! F̂(y | x) = Φ(ĝ)           se = φ(ĝ) √(T′ΞT)
//! f̂(y | x) = φ(ĝ) ∂_y ĝ     se = φ(ĝ) √(Δ′ΞΔ),  Δ = −ĝ ∂_yĝ T + t
//! Q̂(u | x) solves ĝ = Φ⁻¹(u) se = √(T′ΞT) / ∂_y ĝ
//! ```
//!
//! `Ξ` is the covariance of the standardized coefficients. Inputs and outputs
//! of the public methods are in raw data units.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{DesignMatrices, Dictionary};
use crate::error::{GtrError, Result};
use crate::normal;

/// Tolerance on `|ĝ − Φ⁻¹(u)|` for the quantile root finder.
pub const LEVEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrfKind {
    Cdf,
    Pdf,
    Quantile,
}

impl DrfKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DrfKind::Cdf => "cdf",
            DrfKind::Pdf => "pdf",
            DrfKind::Quantile => "quantile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgmViolation {
    pub x: Vec<f64>,
    pub u: f64,
    /// `b′t` at the quantile, or `None` when the quantile itself failed.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgmReport {
    pub passed: bool,
    pub violations: Vec<QgmViolation>,
    pub x_points: usize,
    pub u_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub x: Vec<f64>,
    pub grid: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub kind: DrfKind,
}

/// `ĝ` and `∂_y ĝ` at a standardized point.
pub fn transform(dict: &Dictionary, b: &DVector<f64>, x_std: &[f64], y_std: f64) -> Result<(f64, f64)> {
    let (tl, ts) = dict.eval(x_std, y_std)?;
    Ok((b.dot(&tl), b.dot(&ts)))
}

/// `y ↦ ĝ(y, x)` at a fixed standardized `x`, with the coefficients collapsed
/// over `W(x)`: `c_j = Σ_k W_k(x) b_{kJ+j}`. Each evaluation then costs O(J).
#[derive(Debug, Clone)]
pub struct Section<'a> {
    dict: &'a Dictionary,
    c: Vec<f64>,
}

impl<'a> Section<'a> {
    pub fn new(dict: &'a Dictionary, b: &DVector<f64>, x_std: &[f64]) -> Result<Self> {
        if b.len() != dict.jk() {
            return Err(GtrError::DimensionMismatch { expected: dict.jk(), got: b.len() });
        }
        let w = dict.w_values(x_std)?;
        let j = dict.j();
        let c = (0..j).map(|jj| w.iter().enumerate().map(|(k, wk)| wk * b[k * j + jj]).sum()).collect();
        Ok(Self { dict, c })
    }

    /// `(ĝ, ∂_y ĝ)` at standardized `y`.
    pub fn eval(&self, y: f64) -> (f64, f64) {
        let (level, slope) = self.dict.s_values(y);
        let g = level.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        let dg = slope.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        (g, dg)
    }

    /// Slope outside the outcome knot span (the pure-y varying coefficient `β₂(x)`).
    pub fn tail_slope(&self) -> f64 {
        self.c[1]
    }

    /// Closed-form root of `ĝ = z` when it lies where `ĝ` is affine in y.
    pub fn affine_tail_root(&self, z: f64) -> Option<f64> {
        let slope = self.tail_slope();
        if !(slope > 0.0) {
            return None;
        }
        match self.dict.y_knot_span() {
            None => Some((z - self.c[0]) / slope),
            Some((lo, hi)) => {
                let (g_lo, _) = self.eval(lo);
                let (g_hi, _) = self.eval(hi);
                if z <= g_lo {
                    Some(lo + (z - g_lo) / slope)
                } else if z >= g_hi {
                    Some(hi + (z - g_hi) / slope)
                } else {
                    None
                }
            }
        }
    }

    /// Affine tails in closed form, otherwise [`Section::solve_numeric`].
    pub fn solve(&self, z: f64, start: f64) -> Result<f64> {
        match self.affine_tail_root(z) {
            Some(y) => Ok(y),
            None => self.solve_numeric(z, start),
        }
    }

    /// Bracket doubling from `start`, then Newton safeguarded by bisection.
    pub fn solve_numeric(&self, z: f64, start: f64) -> Result<f64> {
        let (g0, _) = self.eval(start);
        if g0 == z {
            return Ok(start);
        }
        let dir = if g0 < z { 1.0 } else { -1.0 };
        let mut step = 1.0;
        let mut far = start;
        let mut found = false;
        for _ in 0..1100 {
            far = start + dir * step;
            let (gf, _) = self.eval(far);
            if (gf - z) * dir >= 0.0 {
                found = true;
                break;
            }
            if !far.is_finite() {
                break;
            }
            step *= 2.0;
        }
        if !found {
            return Err(self.unattainable(z));
        }
        // the last point short of the level; g(a) < z <= g(c)
        let near = if step == 1.0 { start } else { start + dir * step / 2.0 };
        let (mut a, mut c) = if dir > 0.0 { (near, far) } else { (far, near) };
        let mut y = 0.5 * (a + c);
        for _ in 0..400 {
            let (gy, dgy) = self.eval(y);
            let r = gy - z;
            if r.abs() <= 1e-3 * LEVEL_TOL {
                return Ok(y);
            }
            if r < 0.0 {
                a = y;
            } else {
                c = y;
            }
            if c - a <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
                break;
            }
            let newton = y - r / dgy;
            y = if dgy > 0.0 && newton > a && newton < c { newton } else { 0.5 * (a + c) };
        }
        let (gy, _) = self.eval(y);
        if (gy - z).abs() <= LEVEL_TOL {
            Ok(y)
        } else {
            Err(self.unattainable(z))
        }
    }

    /// Error carrying the approximate `(inf, sup)` of `Φ(ĝ(·, x))`: the tails
    /// run to opposite infinities unless flat, in which case the knot span is scanned.
    fn unattainable(&self, z: f64) -> GtrError {
        let (lo, hi) = if self.tail_slope() != 0.0 {
            (0.0, 1.0)
        } else {
            let (a, b) = self.dict.y_knot_span().unwrap_or((-1.0, 1.0));
            let mut gmin = f64::INFINITY;
            let mut gmax = f64::NEG_INFINITY;
            for i in 0..=400 {
                let (g, _) = self.eval(a + (b - a) * i as f64 / 400.0);
                gmin = gmin.min(g);
                gmax = gmax.max(g);
            }
            (normal::cdf(gmin), normal::cdf(gmax))
        };
        GtrError::LevelUnattainable { u: normal::cdf(z), lo, hi }
    }
}

/// Slope of `y ↦ ĝ(y, x)` outside the outcome knot span.
pub fn tail_slope(dict: &Dictionary, b: &DVector<f64>, x_std: &[f64]) -> Result<f64> {
    Ok(Section::new(dict, b, x_std)?.tail_slope())
}

/// Closed-form root of `ĝ(y, x) = z` when it lies where `ĝ` is affine in y,
/// i.e. outside the outcome knot span (or anywhere if there is none).
pub fn affine_tail_root(dict: &Dictionary, b: &DVector<f64>, x_std: &[f64], z: f64) -> Result<Option<f64>> {
    Ok(Section::new(dict, b, x_std)?.affine_tail_root(z))
}

/// Solves `ĝ(y, x) = z` for standardized y.
pub fn solve_level(dict: &Dictionary, b: &DVector<f64>, x_std: &[f64], z: f64, start: f64) -> Result<f64> {
    Section::new(dict, b, x_std)?.solve(z, start)
}

/// [`solve_level`] without the closed-form tail shortcut.
pub fn solve_level_numeric(dict: &Dictionary, b: &DVector<f64>, x_std: &[f64], z: f64, start: f64) -> Result<f64> {
    Section::new(dict, b, x_std)?.solve_numeric(z, start)
}

/// Bound (dictionary, coefficients, covariance) for evaluating DRFs.
#[derive(Debug, Clone)]
pub struct DrfEvaluator {
    dict: Dictionary,
    b: DVector<f64>,
    cov: Option<DMatrix<f64>>,
}

impl DrfEvaluator {
    pub fn new(dict: Dictionary, b: DVector<f64>, cov: Option<DMatrix<f64>>) -> Result<Self> {
        if b.len() != dict.jk() {
            return Err(GtrError::DimensionMismatch { expected: dict.jk(), got: b.len() });
        }
        if let Some(c) = &cov {
            if c.nrows() != dict.jk() || c.ncols() != dict.jk() {
                return Err(GtrError::DimensionMismatch { expected: dict.jk(), got: c.nrows() });
            }
        }
        Ok(Self { dict, b, cov })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.cov.as_ref()
    }

    fn quad_se(&self, v: &DVector<f64>) -> Option<f64> {
        self.cov.as_ref().map(|c| (v.dot(&(c * v))).max(0.0).sqrt())
    }

    fn x_std(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dict.num_covariates() {
            return Err(GtrError::DimensionMismatch { expected: self.dict.num_covariates(), got: x.len() });
        }
        Ok(self.dict.standardization().x_to_std(x))
    }

    /// `(ĝ, ∂_y ĝ)` at raw `(x, y)`, derivative in standardized y units.
    pub fn transform_raw(&self, x: &[f64], y: f64) -> Result<(f64, f64)> {
        let xs = self.x_std(x)?;
        transform(&self.dict, &self.b, &xs, self.dict.standardization().y_to_std(y))
    }

    pub fn cdf(&self, x: &[f64], y: f64) -> Result<Estimate> {
        let xs = self.x_std(x)?;
        let ys = self.dict.standardization().y_to_std(y);
        let (tl, _) = self.dict.eval(&xs, ys)?;
        let g = self.b.dot(&tl);
        Ok(Estimate { value: normal::cdf(g), se: self.quad_se(&tl).map(|s| normal::pdf(g) * s) })
    }

    pub fn pdf(&self, x: &[f64], y: f64) -> Result<Estimate> {
        let xs = self.x_std(x)?;
        let st = self.dict.standardization();
        let (tl, ts) = self.dict.eval(&xs, st.y_to_std(y))?;
        let g = self.b.dot(&tl);
        let dg = self.b.dot(&ts);
        let delta = &ts - &tl * (g * dg);
        let phi = normal::pdf(g);
        Ok(Estimate {
            value: phi * dg / st.y_sd,
            se: self.quad_se(&delta).map(|s| phi * s / st.y_sd),
        })
    }

    /// Standardized quantile `y` with `ĝ(y, x) = Φ⁻¹(u)`.
    pub fn quantile_std(&self, x_std: &[f64], u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(GtrError::InvalidArgument(format!("quantile level must be in (0, 1), got {u}")));
        }
        let z = normal::quantile(u);
        solve_level(&self.dict, &self.b, x_std, z, self.dict.standardization().y_median)
    }

    pub fn quantile(&self, x: &[f64], u: f64) -> Result<Estimate> {
        let xs = self.x_std(x)?;
        let st = self.dict.standardization();
        let y0 = self.quantile_std(&xs, u)?;
        let (tl, ts) = self.dict.eval(&xs, y0)?;
        let dg = self.b.dot(&ts);
        let se = self.quad_se(&tl).map(|s| st.y_sd * s / dg);
        Ok(Estimate { value: st.y_from_std(y0), se })
    }

    /// Checks `b′t(x, Q̂(x, u)) > 0` on every grid pair (raw-unit `x`).
    pub fn qgm_check(&self, x_grid: &[Vec<f64>], u_grid: &[f64]) -> Result<QgmReport> {
        if x_grid.is_empty() || u_grid.is_empty() {
            return Err(GtrError::InvalidArgument("QGM grids must be nonempty".into()));
        }
        let per_x: Vec<Vec<QgmViolation>> = x_grid
            .par_iter()
            .map(|x| -> Result<Vec<QgmViolation>> {
                let xs = self.x_std(x)?;
                let sec = Section::new(&self.dict, &self.b, &xs)?;
                let mut start = self.dict.standardization().y_median;
                let mut out = Vec::new();
                for &u in u_grid {
                    let eta = if u > 0.0 && u < 1.0 {
                        sec.solve(normal::quantile(u), start).ok().map(|y0| {
                            start = y0;
                            sec.eval(y0).1
                        })
                    } else {
                        None
                    };
                    match eta {
                        Some(e) if e > 0.0 => {}
                        _ => out.push(QgmViolation { x: x.clone(), u, eta }),
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let violations: Vec<QgmViolation> = per_x.into_iter().flatten().collect();
        Ok(QgmReport {
            passed: violations.is_empty(),
            violations,
            x_points: x_grid.len(),
            u_points: u_grid.len(),
        })
    }

    /// Pointwise bands `estimate ± z·se` at each `(x, grid point)`. The grid
    /// holds outcome values for CDF/PDF and levels for quantiles. CDF bands
    /// are clipped to [0, 1] and PDF lower bands at 0.
    pub fn band_grid(&self, x_values: &[Vec<f64>], grid: &[f64], kind: DrfKind, level: f64) -> Result<Vec<BandRow>> {
        if self.cov.is_none() {
            return Err(GtrError::MissingCovariance);
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(GtrError::InvalidArgument(format!("confidence level must be in (0, 1), got {level}")));
        }
        let zcrit = normal::two_sided_critical(level);
        let mut rows = Vec::with_capacity(x_values.len() * grid.len());
        for x in x_values {
            self.warn_if_extrapolating(x);
            for &gp in grid {
                let est = match kind {
                    DrfKind::Cdf => self.cdf(x, gp)?,
                    DrfKind::Pdf => self.pdf(x, gp)?,
                    DrfKind::Quantile => self.quantile(x, gp)?,
                };
                let se = est.se.unwrap_or(0.0);
                let (mut lower, mut upper) = (est.value - zcrit * se, est.value + zcrit * se);
                let mut estimate = est.value;
                match kind {
                    DrfKind::Cdf => {
                        lower = lower.clamp(0.0, 1.0);
                        upper = upper.clamp(0.0, 1.0);
                        estimate = estimate.clamp(0.0, 1.0);
                    }
                    DrfKind::Pdf => {
                        lower = lower.max(0.0);
                        estimate = estimate.max(0.0);
                    }
                    DrfKind::Quantile => {}
                }
                rows.push(BandRow { x: x.clone(), grid: gp, estimate, lower, upper, kind });
            }
        }
        Ok(rows)
    }

    fn warn_if_extrapolating(&self, x: &[f64]) {
        let st = self.dict.standardization();
        let xs = st.x_to_std(x);
        let outside = xs.iter().zip(&st.x_ranges).any(|(v, (lo, hi))| *v < *lo - 1e-12 || *v > *hi + 1e-12);
        if outside {
            warn!("x = {x:?} lies outside the observed covariate range; bands are extrapolated");
        }
    }
}

/// Quantile levels 0.01, 0.02, …, 0.99.
pub fn default_u_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// `count` raw-unit covariate points spanning the sample: equispaced for a
/// single covariate, an evenly spaced subsample of observed rows otherwise.
pub fn default_x_grid(dict: &Dictionary, d: &DesignMatrices, count: usize) -> Vec<Vec<f64>> {
    let st = dict.standardization();
    match dict.num_covariates() {
        0 => vec![vec![]],
        1 => {
            let (lo, hi) = st.x_ranges[0];
            crate::bspline::equispaced(lo, hi, count.max(2))
                .into_iter()
                .map(|v| st.x_from_std(&[v]))
                .collect()
        }
        _ => {
            let mut rows: Vec<&Vec<f64>> = d.x.iter().collect();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let n = rows.len();
            let m = count.min(n).max(1);
            (0..m)
                .map(|i| {
                    let idx = if m == 1 { 0 } else { i * (n - 1) / (m - 1) };
                    st.x_from_std(rows[idx])
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests;
