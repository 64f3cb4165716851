//! B-spline bases on a strictly ascending breakpoint vector.
//!
//! Two flavours are used by the dictionary:
//!
//! * [`BSpline`] over an arbitrary (possibly clamped) knot vector, evaluated
//!   with the bottom-up Cox–de Boor recursion.
//! * [`IntegratedBSpline`], the normalized running integrals
//!   `S_i(y) = ∫_{-∞}^y B_i / mass_i` of an unclamped basis. These are CDFs
//!   with compactly supported densities, computed with the degree-elevation
//!   identity `∫_{-∞}^y B_{i,d} = mass_i · Σ_{m ≥ i} B_{m,d+1}(y)`.

use crate::error::{GtrError, Result};

/// Strictly ascending breakpoints with at least `min_len` entries.
pub(crate) fn validate_breakpoints(knots: &[f64], min_len: usize) -> Result<()> {
    if knots.len() < min_len {
        return Err(GtrError::InvalidKnots(format!(
            "need at least {min_len} knots, got {}",
            knots.len()
        )));
    }
    if knots.iter().any(|k| !k.is_finite()) {
        return Err(GtrError::InvalidKnots("knots must be finite".into()));
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GtrError::InvalidKnots("knots must be strictly ascending".into()));
    }
    Ok(())
}

/// `count` equispaced points covering `[lo, hi]`.
pub fn equispaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    debug_assert!(count >= 2);
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSpline {
    degree: usize,
    knots: Vec<f64>,
}

impl BSpline {
    /// `knots` is the full knot vector (non-decreasing, repeats allowed).
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < degree + 2 {
            return Err(GtrError::InvalidKnots(format!(
                "degree {degree} needs at least {} knots, got {}",
                degree + 2,
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(GtrError::InvalidKnots("knot vector must be finite and non-decreasing".into()));
        }
        if knots[knots.len() - 1] <= knots[0] {
            return Err(GtrError::InvalidKnots("knot vector has zero width".into()));
        }
        Ok(Self { degree, knots })
    }

    /// Knot vector with each end repeated so that the boundary knots have
    /// multiplicity `degree + 1`.
    pub fn clamped(degree: usize, breakpoints: &[f64]) -> Result<Self> {
        validate_breakpoints(breakpoints, 2)?;
        let first = breakpoints[0];
        let last = breakpoints[breakpoints.len() - 1];
        let mut knots = vec![first; degree];
        knots.extend_from_slice(breakpoints);
        knots.extend(std::iter::repeat_n(last, degree));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Writes all basis values at `x` into `out` (length [`num_basis`]).
    ///
    /// Intervals are half-open `[t_s, t_{s+1})`. With `right_closed` the last
    /// knot itself is evaluated as the left limit of the final non-empty
    /// interval, which is what a clamped basis needs at its right boundary.
    ///
    /// [`num_basis`]: BSpline::num_basis
    pub fn eval_into(&self, x: f64, right_closed: bool, out: &mut [f64]) {
        let t = &self.knots;
        let m = t.len() - 1;
        debug_assert_eq!(out.len(), self.num_basis());
        out.iter_mut().for_each(|v| *v = 0.0);

        let span = if x >= t[0] && x < t[m] {
            // last s with t_s <= x; the interval [t_s, t_{s+1}) is non-empty
            t.partition_point(|&k| k <= x) - 1
        } else if right_closed && x == t[m] {
            (0..m).rev().find(|&s| t[s] < t[s + 1]).unwrap_or(0)
        } else {
            return;
        };

        // degree-0 functions live on the m intervals
        let mut work = vec![0.0; m];
        work[span] = 1.0;
        for k in 1..=self.degree {
            for i in 0..(m - k) {
                let left_den = t[i + k] - t[i];
                let right_den = t[i + k + 1] - t[i + 1];
                let left = if left_den > 0.0 { (x - t[i]) / left_den * work[i] } else { 0.0 };
                let right = if right_den > 0.0 {
                    (t[i + k + 1] - x) / right_den * work[i + 1]
                } else {
                    0.0
                };
                work[i] = left + right;
            }
        }
        out.copy_from_slice(&work[..self.num_basis()]);
    }

    pub fn eval(&self, x: f64, right_closed: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis()];
        self.eval_into(x, right_closed, &mut out);
        out
    }

    /// ∫ B_i over the real line: (t_{i+d+1} − t_i)/(d+1).
    pub fn mass(&self, i: usize) -> f64 {
        (self.knots[i + self.degree + 1] - self.knots[i]) / (self.degree + 1) as f64
    }
}

/// Normalized integrals of an unclamped B-spline basis on strictly ascending
/// knots. Each member is a CDF whose density vanishes outside the knot span.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedBSpline {
    base: BSpline,
    elevated: BSpline,
    masses: Vec<f64>,
}

impl IntegratedBSpline {
    pub fn new(degree: usize, knots: &[f64]) -> Result<Self> {
        if degree < 1 {
            return Err(GtrError::InvalidSpec("spline degree must be at least 1".into()));
        }
        validate_breakpoints(knots, degree + 2)?;
        let base = BSpline::new(degree, knots.to_vec())?;
        let last = knots[knots.len() - 1];
        let width = last - knots[knots.len() - 2];
        let mut ext = knots.to_vec();
        ext.extend((1..=degree + 1).map(|r| last + width * r as f64));
        let elevated = BSpline::new(degree + 1, ext)?;
        let masses = (0..base.num_basis()).map(|i| base.mass(i)).collect();
        Ok(Self { base, elevated, masses })
    }

    pub fn len(&self) -> usize {
        self.base.num_basis()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn degree(&self) -> usize {
        self.base.degree()
    }

    pub fn knots(&self) -> &[f64] {
        self.base.knots()
    }

    pub fn support(&self) -> (f64, f64) {
        self.base.support()
    }

    /// Writes `S_i(y)` into `level` and `s_i(y) = B_i(y)/mass_i` into `slope`.
    pub fn eval_into(&self, y: f64, level: &mut [f64], slope: &mut [f64]) {
        let d = self.base.degree();
        let t = self.base.knots();
        let (lo, hi) = self.support();
        if y <= lo {
            level.iter_mut().for_each(|v| *v = 0.0);
            slope.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        if y >= hi {
            level.iter_mut().for_each(|v| *v = 1.0);
            slope.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        self.base.eval_into(y, false, slope);
        for (s, m) in slope.iter_mut().zip(&self.masses) {
            *s /= m;
        }
        let up = self.elevated.eval(y, false);
        // suffix sums of the elevated basis
        let mut acc = 0.0;
        let mut suffix = vec![0.0; up.len() + 1];
        for m in (0..up.len()).rev() {
            acc += up[m];
            suffix[m] = acc;
        }
        for i in 0..self.len() {
            level[i] = if y <= t[i] {
                0.0
            } else if y >= t[i + d + 1] {
                1.0
            } else {
                suffix[i].clamp(0.0, 1.0)
            };
        }
    }
}
