//! Tensor-product dictionaries `T(x, y) = W(x) ⊗ S(y)` and their y-derivative
//! `t(x, y) = W(x) ⊗ s(y)`.
//!
//! `W` always starts with the constant 1. `S` always starts with `(1, y)` and
//! `s` with `(0, 1)`; the optional spline part of `S` consists of normalized
//! integrated B-splines, so each extra `S_j` is bounded and each extra `s_j`
//! vanishes outside the knot span. Coefficients are indexed W-major:
//! `l = k·J + j` (zero-based) multiplies `W_k · S_j`.
//!
//! All evaluation happens in standardized coordinates. Explicit knots in a
//! [`BasisSpec`] are given in raw units and mapped through the bound
//! [`Standardization`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bspline::{equispaced, validate_breakpoints, BSpline, IntegratedBSpline};
use crate::error::{GtrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Linear,
    Bspline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Knots {
    /// Number of equispaced breakpoints over the (standardized) sample range.
    Equispaced(usize),
    /// Breakpoints in raw data units.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    #[serde(default)]
    pub degree: usize,
    #[serde(default)]
    pub knots: Option<Knots>,
}

impl BasisSpec {
    pub fn linear() -> Self {
        Self { kind: BasisKind::Linear, degree: 0, knots: None }
    }

    pub fn bspline(degree: usize, knots: Knots) -> Self {
        Self { kind: BasisKind::Bspline, degree, knots: Some(knots) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySpec {
    /// Covariate basis `W(x)`; the constant is prepended automatically.
    pub w: BasisSpec,
    /// Spline part `s̃(y)` of the derivative basis, if any.
    #[serde(default)]
    pub s_tilde: Option<BasisSpec>,
    #[serde(default = "default_true")]
    pub standardize: bool,
}

fn default_true() -> bool {
    true
}

impl DictionarySpec {
    /// `W = (1, x)`, `S = (1, y)`.
    pub fn linear_linear() -> Self {
        Self { w: BasisSpec::linear(), s_tilde: None, standardize: true }
    }

    /// Cubic B-spline `W` of total dimension `k`, `S = (1, y)`.
    pub fn spline_x(k: usize) -> Self {
        Self {
            w: BasisSpec::bspline(3, Knots::Equispaced(k.saturating_sub(2))),
            s_tilde: None,
            standardize: true,
        }
    }

    /// `W = (1, x)`, integrated B-splines of the given degree in `S`, total dimension `j`.
    pub fn spline_y(j: usize, degree: usize) -> Self {
        Self {
            w: BasisSpec::linear(),
            s_tilde: Some(BasisSpec::bspline(degree, Knots::Equispaced((j + degree).saturating_sub(1)))),
            standardize: true,
        }
    }

    pub fn spline_spline(k: usize, j: usize, y_degree: usize) -> Self {
        Self { w: Self::spline_x(k).w, ..Self::spline_y(j, y_degree) }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    /// Short human-readable label such as `spline-spline(K=7,J=5,q=2)`.
    pub fn label(&self) -> String {
        let xk = match self.w.kind {
            BasisKind::Linear => "linear",
            BasisKind::Bspline => "spline",
        };
        let yk = if self.s_tilde.is_some() { "spline" } else { "linear" };
        let mut s = format!("{xk}-{yk}");
        let mut parts = Vec::new();
        if let (BasisKind::Bspline, Some(k)) = (self.w.kind, &self.w.knots) {
            parts.push(format!("K={}", w_dim_from_knots(self.w.degree, k)));
        }
        if let Some(st) = &self.s_tilde {
            if let Some(k) = &st.knots {
                parts.push(format!("J={}", y_dim_from_knots(st.degree, k)));
            }
            parts.push(format!("q={}", st.degree));
        }
        if !parts.is_empty() {
            s.push('(');
            s.push_str(&parts.join(","));
            s.push(')');
        }
        s
    }
}

fn knot_count(k: &Knots) -> usize {
    match k {
        Knots::Equispaced(n) => *n,
        Knots::Explicit(v) => v.len(),
    }
}

fn w_dim_from_knots(degree: usize, k: &Knots) -> usize {
    // clamped basis has len + degree − 1 functions; one is dropped, plus the constant
    knot_count(k) + degree - 1
}

fn y_dim_from_knots(degree: usize, k: &Knots) -> usize {
    (knot_count(k) + 1).saturating_sub(degree + 1) + 1
}

/// One row of data: outcome plus covariate vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl Sample {
    pub fn new(y: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(GtrError::DimensionMismatch { expected: y.len(), got: x.len() });
        }
        if y.is_empty() {
            return Err(GtrError::EmptyData);
        }
        let p = x[0].len();
        for (i, row) in x.iter().enumerate() {
            if row.len() != p {
                return Err(GtrError::DimensionMismatch { expected: p, got: row.len() });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(GtrError::NonFiniteData { row: i, column: format!("x{}", c + 1) });
            }
            if !y[i].is_finite() {
                return Err(GtrError::NonFiniteData { row: i, column: "y".into() });
            }
        }
        Ok(Self { y, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

/// Affine map between raw and standardized coordinates, plus sample ranges
/// (standardized) used for knot placement and evaluation grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub y_mean: f64,
    pub y_sd: f64,
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
    pub y_range: (f64, f64),
    pub y_median: f64,
    pub x_ranges: Vec<(f64, f64)>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self {
            y_mean: 0.0,
            y_sd: 1.0,
            x_means: vec![0.0; p],
            x_sds: vec![1.0; p],
            y_range: (-1.0, 1.0),
            y_median: 0.0,
            x_ranges: vec![(0.0, 1.0); p],
        }
    }

    fn from_sample(sample: &Sample, standardize: bool) -> Self {
        let p = sample.num_covariates();
        let (y_mean, y_sd) = if standardize { mean_sd(&sample.y) } else { (0.0, 1.0) };
        let mut x_means = vec![0.0; p];
        let mut x_sds = vec![1.0; p];
        if standardize {
            for c in 0..p {
                let col: Vec<f64> = sample.x.iter().map(|r| r[c]).collect();
                let (m, s) = mean_sd(&col);
                x_means[c] = m;
                x_sds[c] = s;
            }
        }
        let mut st = Self {
            y_mean,
            y_sd,
            x_means,
            x_sds,
            y_range: (0.0, 0.0),
            y_median: 0.0,
            x_ranges: vec![(0.0, 0.0); p],
        };
        let ys: Vec<f64> = sample.y.iter().map(|&y| st.y_to_std(y)).collect();
        st.y_range = min_max(&ys);
        st.y_median = median(&ys);
        for c in 0..p {
            let col: Vec<f64> = sample.x.iter().map(|r| (r[c] - st.x_means[c]) / st.x_sds[c]).collect();
            st.x_ranges[c] = min_max(&col);
        }
        st
    }

    pub fn y_to_std(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_sd
    }

    pub fn y_from_std(&self, y: f64) -> f64 {
        self.y_mean + self.y_sd * y
    }

    pub fn x_to_std(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_means.iter().zip(&self.x_sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn x_from_std(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_means.iter().zip(&self.x_sds))
            .map(|(v, (m, s))| m + s * v)
            .collect()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let sd = var.sqrt();
    (m, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Everything needed to rebuild a [`Dictionary`] without the data: the
/// declarative spec plus knots resolved to standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDictionary {
    pub spec: DictionarySpec,
    pub num_covariates: usize,
    pub w_knots: Option<Vec<f64>>,
    pub y_knots: Option<Vec<f64>>,
    pub standardization: Standardization,
}

#[derive(Debug, Clone, PartialEq)]
enum CovariateBasis {
    Linear,
    /// Clamped basis with its first function dropped (the constant takes its place).
    Spline { basis: BSpline, lo: f64, hi: f64 },
}

/// A dictionary bound to knots and a standardization. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    resolved: ResolvedDictionary,
    w: CovariateBasis,
    s: Option<IntegratedBSpline>,
    k: usize,
    j: usize,
}

/// Evaluated `T` and `t` rows for a sample (standardized coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    /// Rows `T(x_i, y_i)`, n × JK.
    pub level: DMatrix<f64>,
    /// Rows `t(x_i, y_i)`, n × JK.
    pub slope: DMatrix<f64>,
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Raw-unit outcome scale; raw log-likelihood is `n (Q_n − ln y_scale)`.
    pub y_scale: f64,
}

impl DesignMatrices {
    pub fn n(&self) -> usize {
        self.level.nrows()
    }

    pub fn jk(&self) -> usize {
        self.level.ncols()
    }

    /// Log-likelihood in raw outcome units for a per-observation value `q`.
    pub fn raw_loglik(&self, q: f64) -> f64 {
        self.n() as f64 * (q - self.y_scale.ln())
    }
}

/// Binds `spec` to the sample (standardization, knot placement) and evaluates
/// the design rows.
pub fn build_dictionary(spec: &DictionarySpec, sample: &Sample) -> Result<(Dictionary, DesignMatrices)> {
    if sample.is_empty() {
        return Err(GtrError::EmptyData);
    }
    let sample = Sample::new(sample.y.clone(), sample.x.clone())?;
    let p = sample.num_covariates();
    let st = Standardization::from_sample(&sample, spec.standardize);

    let w_knots = match spec.w.kind {
        BasisKind::Linear => None,
        BasisKind::Bspline => {
            if p != 1 {
                return Err(GtrError::InvalidSpec(format!(
                    "a B-spline covariate basis needs exactly one covariate, got {p}"
                )));
            }
            let (lo, hi) = st.x_ranges[0];
            Some(resolve_knots(&spec.w, lo, hi, |v| (v - st.x_means[0]) / st.x_sds[0], 2)?)
        }
    };
    let y_knots = match &spec.s_tilde {
        None => None,
        Some(b) => {
            if b.kind != BasisKind::Bspline {
                return Err(GtrError::InvalidSpec("the y-derivative basis must be a B-spline".into()));
            }
            let (lo, hi) = st.y_range;
            Some(resolve_knots(b, lo, hi, |v| st.y_to_std(v), b.degree + 2)?)
        }
    };
    let dict = Dictionary::from_resolved(ResolvedDictionary {
        spec: spec.clone(),
        num_covariates: p,
        w_knots,
        y_knots,
        standardization: st,
    })?;
    let design = dict.design(&sample)?;
    Ok((dict, design))
}

fn resolve_knots(
    b: &BasisSpec,
    lo: f64,
    hi: f64,
    to_std: impl Fn(f64) -> f64,
    min_len: usize,
) -> Result<Vec<f64>> {
    if b.degree < 1 {
        return Err(GtrError::InvalidSpec("spline degree must be at least 1".into()));
    }
    let knots = match &b.knots {
        None => return Err(GtrError::InvalidSpec("B-spline basis needs knots".into())),
        Some(Knots::Equispaced(n)) => {
            if *n < min_len {
                return Err(GtrError::InvalidKnots(format!("need at least {min_len} knots, got {n}")));
            }
            if hi <= lo {
                return Err(GtrError::InvalidKnots("sample range is degenerate".into()));
            }
            equispaced(lo, hi, *n)
        }
        Some(Knots::Explicit(v)) => v.iter().map(|&k| to_std(k)).collect(),
    };
    validate_breakpoints(&knots, min_len)?;
    Ok(knots)
}

impl Dictionary {
    /// Rebuilds a dictionary from resolved knots.
    pub fn from_resolved(resolved: ResolvedDictionary) -> Result<Self> {
        let spec = &resolved.spec;
        let p = resolved.num_covariates;
        if resolved.standardization.x_means.len() != p {
            return Err(GtrError::DimensionMismatch {
                expected: p,
                got: resolved.standardization.x_means.len(),
            });
        }
        let (w, k) = match spec.w.kind {
            BasisKind::Linear => (CovariateBasis::Linear, 1 + p),
            BasisKind::Bspline => {
                if p != 1 {
                    return Err(GtrError::InvalidSpec(format!(
                        "a B-spline covariate basis needs exactly one covariate, got {p}"
                    )));
                }
                let knots = resolved
                    .w_knots
                    .as_ref()
                    .ok_or_else(|| GtrError::InvalidSpec("missing covariate knots".into()))?;
                if spec.w.degree < 1 {
                    return Err(GtrError::InvalidSpec("spline degree must be at least 1".into()));
                }
                let basis = BSpline::clamped(spec.w.degree, knots)?;
                let k = basis.num_basis();
                (CovariateBasis::Spline { basis, lo: knots[0], hi: knots[knots.len() - 1] }, k)
            }
        };
        let s = match &spec.s_tilde {
            None => None,
            Some(b) => {
                if b.kind != BasisKind::Bspline {
                    return Err(GtrError::InvalidSpec("the y-derivative basis must be a B-spline".into()));
                }
                let knots = resolved
                    .y_knots
                    .as_ref()
                    .ok_or_else(|| GtrError::InvalidSpec("missing outcome knots".into()))?;
                Some(IntegratedBSpline::new(b.degree, knots)?)
            }
        };
        let j = 2 + s.as_ref().map_or(0, IntegratedBSpline::len);
        Ok(Self { resolved, w, s, k, j })
    }

    /// Dictionary with explicit raw-unit knots and no standardization; no data needed.
    pub fn fixed(spec: &DictionarySpec, num_covariates: usize) -> Result<Self> {
        if spec.standardize {
            return Err(GtrError::InvalidSpec("a fixed dictionary cannot standardize".into()));
        }
        let explicit = |b: &BasisSpec| match &b.knots {
            Some(Knots::Explicit(v)) => {
                validate_breakpoints(v, 2)?;
                Ok(v.clone())
            }
            _ => Err(GtrError::InvalidSpec("a fixed dictionary needs explicit knots".into())),
        };
        let w_knots = match spec.w.kind {
            BasisKind::Linear => None,
            BasisKind::Bspline => Some(explicit(&spec.w)?),
        };
        let y_knots = spec.s_tilde.as_ref().map(explicit).transpose()?;
        let mut st = Standardization::identity(num_covariates);
        if let Some(k) = &y_knots {
            st.y_range = (k[0], k[k.len() - 1]);
            st.y_median = 0.5 * (k[0] + k[k.len() - 1]);
        }
        Self::from_resolved(ResolvedDictionary {
            spec: spec.clone(),
            num_covariates,
            w_knots,
            y_knots,
            standardization: st,
        })
    }

    pub fn resolved(&self) -> &ResolvedDictionary {
        &self.resolved
    }

    pub fn spec(&self) -> &DictionarySpec {
        &self.resolved.spec
    }

    pub fn standardization(&self) -> &Standardization {
        &self.resolved.standardization
    }

    pub fn num_covariates(&self) -> usize {
        self.resolved.num_covariates
    }

    /// Dimension K of `W`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension J of `S`.
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn jk(&self) -> usize {
        self.j * self.k
    }

    /// Index of the coefficient on `W_k · S_j`.
    pub fn index(&self, k: usize, j: usize) -> usize {
        k * self.j + j
    }

    /// Coefficients on `1·1` and `1·y`, which are never penalized.
    pub fn unpenalized(&self) -> Vec<usize> {
        vec![self.index(0, 0), self.index(0, 1)]
    }

    /// Standardized knot span of the outcome splines, if any.
    pub fn y_knot_span(&self) -> Option<(f64, f64)> {
        self.s.as_ref().map(IntegratedBSpline::support)
    }

    /// `W(x)` at a standardized covariate vector.
    pub fn w_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_covariates() {
            return Err(GtrError::DimensionMismatch { expected: self.num_covariates(), got: x.len() });
        }
        let mut out = Vec::with_capacity(self.k);
        out.push(1.0);
        match &self.w {
            CovariateBasis::Linear => out.extend_from_slice(x),
            CovariateBasis::Spline { basis, lo, hi } => {
                let v = basis.eval(x[0].clamp(*lo, *hi), true);
                out.extend_from_slice(&v[1..]);
            }
        }
        Ok(out)
    }

    /// `(S(y), s(y))` at a standardized outcome value.
    pub fn s_values(&self, y: f64) -> (Vec<f64>, Vec<f64>) {
        let mut level = vec![0.0; self.j];
        let mut slope = vec![0.0; self.j];
        level[0] = 1.0;
        level[1] = y;
        slope[1] = 1.0;
        if let Some(s) = &self.s {
            let (a, b) = (&mut level[2..], &mut slope[2..]);
            s.eval_into(y, a, b);
        }
        (level, slope)
    }

    /// `(T(x, y), t(x, y))` in standardized coordinates.
    pub fn eval(&self, x: &[f64], y: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let w = self.w_values(x)?;
        let (s_level, s_slope) = self.s_values(y);
        let mut level = DVector::zeros(self.jk());
        let mut slope = DVector::zeros(self.jk());
        for (k, wk) in w.iter().enumerate() {
            for j in 0..self.j {
                level[k * self.j + j] = wk * s_level[j];
                slope[k * self.j + j] = wk * s_slope[j];
            }
        }
        Ok((level, slope))
    }

    /// `T(x, y)` in standardized coordinates.
    pub fn eval_level(&self, x: &[f64], y: f64) -> Result<DVector<f64>> {
        Ok(self.eval(x, y)?.0)
    }

    /// `t(x, y) = ∂_y T(x, y)` in standardized coordinates.
    pub fn eval_slope(&self, x: &[f64], y: f64) -> Result<DVector<f64>> {
        Ok(self.eval(x, y)?.1)
    }

    /// Evaluates design rows for raw-unit data through the bound standardization.
    pub fn design(&self, sample: &Sample) -> Result<DesignMatrices> {
        let n = sample.len();
        let st = self.standardization();
        let ys: Vec<f64> = sample.y.iter().map(|&y| st.y_to_std(y)).collect();
        let xs: Vec<Vec<f64>> = sample.x.iter().map(|x| st.x_to_std(x)).collect();
        self.design_std(xs, ys).inspect(|d| debug_assert_eq!(d.n(), n))
    }

    /// Evaluates design rows for data already in standardized coordinates.
    pub fn design_std(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<DesignMatrices> {
        let n = y.len();
        if x.len() != n {
            return Err(GtrError::DimensionMismatch { expected: n, got: x.len() });
        }
        let jk = self.jk();
        let mut level = DMatrix::zeros(n, jk);
        let mut slope = DMatrix::zeros(n, jk);
        for i in 0..n {
            let (tl, ts) = self.eval(&x[i], y[i])?;
            level.row_mut(i).copy_from(&tl.transpose());
            slope.row_mut(i).copy_from(&ts.transpose());
        }
        Ok(DesignMatrices { level, slope, y, x, y_scale: self.standardization().y_sd })
    }

    /// `A` with `T_std(x, y) = A · T_raw(x, y)`, so raw-unit coefficients are
    /// `Aᵀ b_std` and their covariance `Aᵀ Σ A`.
    ///
    /// The raw dictionary uses `(1, x)` and `(1, y)` for the linear factors and
    /// the same spline functions with knots mapped back to raw units.
    pub fn raw_map(&self) -> DMatrix<f64> {
        let st = self.standardization();
        let mut aw = DMatrix::identity(self.k, self.k);
        if matches!(self.w, CovariateBasis::Linear) {
            for c in 0..self.num_covariates() {
                aw[(c + 1, 0)] = -st.x_means[c] / st.x_sds[c];
                aw[(c + 1, c + 1)] = 1.0 / st.x_sds[c];
            }
        }
        let mut a_s = DMatrix::identity(self.j, self.j);
        a_s[(1, 0)] = -st.y_mean / st.y_sd;
        a_s[(1, 1)] = 1.0 / st.y_sd;
        aw.kronecker(&a_s)
    }

    pub fn to_raw_coefficients(&self, b: &DVector<f64>) -> DVector<f64> {
        self.raw_map().transpose() * b
    }

    pub fn to_raw_covariance(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let a = self.raw_map();
        a.transpose() * cov * a
    }

    /// Raw-unit knots of the covariate and outcome splines.
    pub fn raw_knots(&self) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let st = self.standardization();
        let w = self
            .resolved
            .w_knots
            .as_ref()
            .map(|k| k.iter().map(|v| st.x_means[0] + st.x_sds[0] * v).collect());
        let y = self.resolved.y_knots.as_ref().map(|k| k.iter().map(|&v| st.y_from_std(v)).collect());
        (w, y)
    }

    /// Pure-y coefficient set to one, all others zero: `b′t ≡ 1`.
    pub fn canonical_point(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.jk());
        b[self.index(0, 1)] = 1.0;
        b
    }
}
