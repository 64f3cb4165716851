//! Dual certificates for unpenalized and adaptive-Lasso GT fits.
//!
//! The dual variables are recovered in closed form, `û_i = b̂′T_i` and
//! `v̂_i = −1/(b̂′t_i)`, and the dual objective
//! `−n(½ log 2π + 1) + Σ {u_i²/2 − log(−v_i)}` is compared with `n Q_n(b̂)`.
//! Dual feasibility `Σ {T_i u_i + t_i v_i} = 0` is exactly the score equation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dictionary::DesignMatrices;
use crate::error::{GtrError, Result};
use crate::normal::LN_2PI;
use crate::objective;
use crate::solver::PenalizedFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
    /// `‖Σ {T_i u_i + t_i v_i}‖_∞`.
    pub constraint_residual: f64,
}

impl DualCertificate {
    /// Gap within `tol · (1 + |primal|)` and residual within `n · tol`.
    pub fn certifies(&self, tol: f64) -> bool {
        self.gap <= tol * (1.0 + self.primal_value.abs()) && self.constraint_residual <= self.u.len() as f64 * tol
    }
}

/// `(û, v̂)` at `b`; fails if some `η_i ≤ 0`.
pub fn dual_point(b: &DVector<f64>, d: &DesignMatrices) -> Result<(DVector<f64>, DVector<f64>)> {
    let u = &d.level * b;
    let eta = &d.slope * b;
    if let Some((row, &e)) = eta.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(GtrError::DomainViolation { row, eta: e });
    }
    Ok((u, eta.map(|e| -1.0 / e)))
}

/// Dual objective at `(u, v)` with `v < 0`.
pub fn dual_value(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() as f64;
    -n * (0.5 * LN_2PI + 1.0) + u.iter().zip(v.iter()).map(|(a, c)| 0.5 * a * a - (-c).ln()).sum::<f64>()
}

/// `Σ_i {T_i u_i + t_i v_i}`, one entry per coefficient.
pub fn dual_scores(d: &DesignMatrices, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    d.level.tr_mul(u) + d.slope.tr_mul(v)
}

pub fn recover_dual(b: &DVector<f64>, d: &DesignMatrices) -> Result<DualCertificate> {
    let (u, v) = dual_point(b, d)?;
    let primal_value = d.n() as f64 * objective::value(b, d)?;
    let dual = dual_value(&u, &v);
    let constraint_residual = dual_scores(d, &u, &v).amax();
    Ok(DualCertificate {
        u: u.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
        dual_value: dual,
        primal_value,
        gap: (primal_value - dual).abs(),
        constraint_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoKktReport {
    /// `|Σ_i {T_il u_i + t_il v_i}|`.
    pub residuals: Vec<f64>,
    /// `λ ŵ_l`.
    pub bounds: Vec<f64>,
    pub tol: f64,
    /// Coordinates breaking the box or, when active and penalized, the
    /// complementary-slackness equality.
    pub violations: Vec<usize>,
    pub passed: bool,
}

/// Default tolerance for [`check_lasso_kkt`]: `1e-6 · n`.
pub fn default_kkt_tol(n: usize) -> f64 {
    1e-6 * n as f64
}

/// Box constraints `residual_l ≤ λŵ_l + tol` of the dual adaptive-Lasso
/// program, plus `residual_l ≥ λŵ_l − tol` on active penalized coordinates.
pub fn check_lasso_kkt(fit: &PenalizedFit, d: &DesignMatrices, tol: f64) -> Result<LassoKktReport> {
    if fit.weights.len() != fit.b_al.len() {
        return Err(GtrError::DimensionMismatch { expected: fit.b_al.len(), got: fit.weights.len() });
    }
    let (u, v) = dual_point(&fit.b_al, d)?;
    let residuals: Vec<f64> = dual_scores(d, &u, &v).iter().map(|s| s.abs()).collect();
    let bounds: Vec<f64> = fit.weights.iter().map(|w| fit.lambda * w).collect();
    let violations: Vec<usize> = (0..residuals.len())
        .filter(|&l| {
            let over = residuals[l] > bounds[l] + tol;
            let penalized_active = fit.b_al[l] != 0.0 && !fit.unpenalized.contains(&l);
            over || (penalized_active && residuals[l] < bounds[l] - tol)
        })
        .collect();
    Ok(LassoKktReport { passed: violations.is_empty(), residuals, bounds, tol, violations })
}
