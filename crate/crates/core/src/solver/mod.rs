//! Maximization of the GT log-likelihood over its effective domain.
//!
//! * [`fit_ml`]: damped Newton with a fraction-to-boundary cap and Armijo
//!   backtracking. `Q_n` is smooth and strictly concave on the open set
//!   `Θ_n`, so every accepted iterate stays feasible and ascends.
//! * [`fit_ml_constrained`]: same iteration on `Q_n + μ Σ log(b′t_c − ε_c)`
//!   with μ driven to zero, for slope-positivity constraints at chosen points.
//! * [`fit_adaptive_lasso`]: proximal Newton for the weighted-L1 problem.
//! * [`fit_ml_with_repair`]: QGM check plus constraint-augmented refits.
//! * [`select_model`]: λ paths, QGM screening and BIC ranking.

mod constrained;
mod lasso;
mod repair;
mod select;

pub use constrained::fit_ml_constrained;
pub use lasso::{adaptive_weights, fit_adaptive_lasso, kkt_residual, PenalizedFit};
pub use repair::{fit_ml_with_repair, repair_grid, RepairConfig, RepairOutcome};
pub use select::{
    default_lambda_grid, select_model, CandidateReport, PathEntry, SelectConfig, SelectionReport,
};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{DesignMatrices, Dictionary};
use crate::error::{GtrError, Result};
use crate::linalg::{eig_extremes, pinv_sym, solve_spd};
use crate::objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Tolerance on ‖score‖_∞.
    pub grad_tol: f64,
    pub boundary_fraction: f64,
    pub armijo_c: f64,
    pub backtrack_ratio: f64,
    /// Keep every accepted iterate in [`FitResult::trace`].
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            boundary_fraction: 0.99,
            armijo_c: 1e-4,
            backtrack_ratio: 0.5,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_iter > 0
            && self.grad_tol > 0.0
            && self.boundary_fraction > 0.0
            && self.armijo_c > 0.0
            && self.backtrack_ratio > 0.0;
        if !positive || self.boundary_fraction >= 1.0 || self.backtrack_ratio >= 1.0 || self.armijo_c >= 0.5 {
            return Err(GtrError::InvalidArgument(format!("invalid solver configuration: {self:?}")));
        }
        Ok(())
    }
}

/// `b′t(x, y) ≥ eps` at a standardized point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeConstraint {
    pub x: Vec<f64>,
    pub y: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub value: f64,
    pub score_norm: f64,
    pub step: f64,
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Coefficients in standardized coordinates.
    pub b_hat: DVector<f64>,
    pub value: f64,
    /// ‖score‖_∞. For constrained fits, ‖score + R′ν‖_∞ with `R` the binding
    /// constraint rows and `ν` their least-squares multipliers, or the barrier
    /// gradient at the smallest μ when the active-set polish was rejected.
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub constraints_added: Vec<SlopeConstraint>,
    /// `None` until a QGM check has been run.
    pub qgm_ok: Option<bool>,
    /// The Hessian was not negative definite at least once and a fallback
    /// direction (pseudo-inverse Newton or gradient) was used.
    pub gradient_fallback: bool,
    /// λ_min / λ_max of ΣT_iT_i′.
    pub gram_condition: f64,
    pub trace: Vec<Iterate>,
}

/// Pure-y coefficient 1, all others 0, so `η_i = 1` everywhere.
pub fn initial_point(d: &DesignMatrices, dict: &Dictionary) -> DVector<f64> {
    debug_assert_eq!(d.jk(), dict.jk());
    dict.canonical_point()
}

pub(crate) fn gram_condition(d: &DesignMatrices) -> f64 {
    let (lo, hi) = eig_extremes(&d.level.tr_mul(&d.level));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio < 1e-10 {
        warn!("ΣT_iT_i′ is nearly singular: smallest/largest eigenvalue = {ratio:e}");
    }
    ratio
}

/// Rows `t(x_c, y_c)` and thresholds for a constraint set.
pub(crate) struct Barrier {
    rows: DMatrix<f64>,
    eps: DVector<f64>,
}

impl Barrier {
    pub(crate) fn new(dict: &Dictionary, constraints: &[SlopeConstraint]) -> Result<Self> {
        let mut rows = DMatrix::zeros(constraints.len(), dict.jk());
        let mut eps = DVector::zeros(constraints.len());
        for (c, con) in constraints.iter().enumerate() {
            if !(con.eps > 0.0) || !con.y.is_finite() || con.x.iter().any(|v| !v.is_finite()) {
                return Err(GtrError::InvalidArgument(format!("invalid constraint {con:?}")));
            }
            rows.row_mut(c).copy_from(&dict.eval_slope(&con.x, con.y)?.transpose());
            eps[c] = con.eps;
        }
        Ok(Self { rows, eps })
    }

    fn slack(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.rows * b - &self.eps
    }
}

/// `Q_n(b) + μ Σ log(b′t_c − ε_c)`; `barrier = None` is plain `Q_n`.
struct Problem<'a> {
    d: &'a DesignMatrices,
    barrier: Option<(&'a Barrier, f64)>,
}

impl Problem<'_> {
    fn value(&self, b: &DVector<f64>) -> Option<f64> {
        let q = objective::value(b, self.d).ok()?;
        match self.barrier {
            None => Some(q),
            Some((bar, mu)) => {
                let s = bar.slack(b);
                if s.iter().any(|v| !(*v > 0.0)) {
                    return None;
                }
                Some(q + mu * s.iter().map(|v| v.ln()).sum::<f64>())
            }
        }
    }

    fn derivatives(&self, b: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let r = objective::evaluate(b, self.d)?;
        let (mut v, mut g, mut h) = (r.value, r.score, r.hessian);
        if let Some((bar, mu)) = self.barrier {
            let s = bar.slack(b);
            for c in 0..s.len() {
                let row = bar.rows.row(c).transpose();
                v += mu * s[c].ln();
                g += &row * (mu / s[c]);
                h -= &row * row.transpose() * (mu / (s[c] * s[c]));
            }
        }
        Ok((v, g, h))
    }

    /// Largest α keeping every `η_i` (and every slack) positive along `dir`.
    fn max_step(&self, b: &DVector<f64>, dir: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        let eta = &self.d.slope * b;
        let deta = &self.d.slope * dir;
        for (h, dh) in eta.iter().zip(deta.iter()) {
            if *dh < 0.0 {
                alpha = alpha.min(-h / dh);
            }
        }
        if let Some((bar, _)) = self.barrier {
            let s = bar.slack(b);
            let ds = &bar.rows * dir;
            for (h, dh) in s.iter().zip(ds.iter()) {
                if *dh < 0.0 {
                    alpha = alpha.min(-h / dh);
                }
            }
        }
        alpha
    }
}

/// Direction for a Hessian that is not numerically negative definite: the
/// minimum-norm Newton step on the well-determined eigenspace if it ascends,
/// else the gradient. Flat directions appear when dictionary columns
/// coincide on the sample.
fn fallback_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let (pinv, _) = pinv_sym(&(-h), 1e-14);
    let dir = pinv * g;
    if dir.iter().all(|v| v.is_finite()) && g.dot(&dir) > 0.0 {
        dir
    } else {
        g.clone()
    }
}

struct NewtonOutcome {
    b: DVector<f64>,
    value: f64,
    score_norm: f64,
    iterations: usize,
    converged: bool,
    gradient_fallback: bool,
    trace: Vec<Iterate>,
}

fn newton(problem: &Problem<'_>, start: DVector<f64>, cfg: &SolverConfig) -> Result<NewtonOutcome> {
    let mut b = start;
    let mut trace = Vec::new();
    let mut gradient_fallback = false;
    let mut iterations = 0;
    let mut converged = false;
    let (mut value, mut g, mut h) = problem.derivatives(&b)?;
    let mut score_norm = g.amax();
    trace.push(Iterate {
        value,
        score_norm,
        step: 0.0,
        b: cfg.record_iterates.then(|| b.as_slice().to_vec()),
    });

    while iterations < cfg.max_iter {
        if score_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        let dir = match solve_spd(&(-&h), &g) {
            Some(dir) => dir,
            None => {
                gradient_fallback = true;
                fallback_direction(&h, &g)
            }
        };
        let slope = g.dot(&dir);
        let alpha_max = problem.max_step(&b, &dir);
        let mut alpha = if alpha_max.is_finite() { (cfg.boundary_fraction * alpha_max).min(1.0) } else { 1.0 };
        let slack = 8.0 * f64::EPSILON * (1.0 + value.abs());
        let mut accepted = None;
        while alpha > 1e-20 {
            let cand = &b + &dir * alpha;
            if let Some(v) = problem.value(&cand) {
                if v >= value + cfg.armijo_c * alpha * slope - slack {
                    accepted = Some(cand);
                    break;
                }
            }
            alpha *= cfg.backtrack_ratio;
        }
        let Some(next) = accepted else {
            break;
        };
        b = next;
        iterations += 1;
        (value, g, h) = problem.derivatives(&b)?;
        score_norm = g.amax();
        trace.push(Iterate {
            value,
            score_norm,
            step: alpha,
            b: cfg.record_iterates.then(|| b.as_slice().to_vec()),
        });
    }
    if !converged && score_norm <= cfg.grad_tol {
        converged = true;
    }
    Ok(NewtonOutcome { b, value, score_norm, iterations, converged, gradient_fallback, trace })
}

/// Unpenalized maximum likelihood from [`initial_point`].
pub fn fit_ml(dict: &Dictionary, d: &DesignMatrices, cfg: &SolverConfig) -> Result<FitResult> {
    fit_ml_from(dict, d, cfg, initial_point(d, dict))
}

/// Unpenalized maximum likelihood from a caller-supplied feasible start.
pub fn fit_ml_from(dict: &Dictionary, d: &DesignMatrices, cfg: &SolverConfig, start: DVector<f64>) -> Result<FitResult> {
    cfg.validate()?;
    if d.jk() != dict.jk() || start.len() != d.jk() {
        return Err(GtrError::DimensionMismatch { expected: dict.jk(), got: d.jk().min(start.len()) });
    }
    let gram = gram_condition(d);
    let out = newton(&Problem { d, barrier: None }, start, cfg)?;
    if !out.converged {
        warn!("fit_ml stopped after {} iterations with ‖score‖ = {:e}", out.iterations, out.score_norm);
    }
    Ok(FitResult {
        b_hat: out.b,
        value: out.value,
        score_norm: out.score_norm,
        iterations: out.iterations,
        converged: out.converged,
        constraints_added: Vec::new(),
        qgm_ok: None,
        gradient_fallback: out.gradient_fallback,
        gram_condition: gram,
        trace: out.trace,
    })
}
