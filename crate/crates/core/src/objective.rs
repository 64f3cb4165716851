//! Sample log-likelihood of a GT regression model and its derivatives.
//!
//! With `e_i = b′T_i` and `η_i = b′t_i`,
//!
//! ```text
//! Q_n(b) = −½ log 2π − ½ mean(e_i²) + mean(log η_i)
//! ψ_i    = −T_i e_i + t_i / η_i
//! γ_i    = −T_i T_i′ − t_i t_i′ / η_i²
//! ```
//!
//! `Q_n` is finite only on `Θ_n = {b : η_i > 0 for all i}`.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DesignMatrices;
use crate::error::{GtrError, Result};
use crate::normal::LN_2PI;

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodReport {
    pub value: f64,
    /// n⁻¹ Σ ψ_i
    pub score: DVector<f64>,
    /// n⁻¹ Σ γ_i
    pub hessian: DMatrix<f64>,
    pub e: DVector<f64>,
    pub eta: DVector<f64>,
}

fn check_dim(b: &DVector<f64>, d: &DesignMatrices) -> Result<()> {
    if b.len() != d.jk() {
        return Err(GtrError::DimensionMismatch { expected: d.jk(), got: b.len() });
    }
    Ok(())
}

/// Index and value of the smallest `η_i`.
pub(crate) fn min_eta(eta: &DVector<f64>) -> (usize, f64) {
    eta.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 || v.is_nan() { (i, v) } else { acc })
}

/// `true` iff `b′t_i > 0` for every row.
pub fn in_domain(b: &DVector<f64>, d: &DesignMatrices) -> Result<bool> {
    check_dim(b, d)?;
    let eta = &d.slope * b;
    Ok(eta.iter().all(|&v| v > 0.0))
}

fn value_from(e: &DVector<f64>, eta: &DVector<f64>) -> Result<f64> {
    let (row, m) = min_eta(eta);
    if !(m > 0.0) {
        return Err(GtrError::DomainViolation { row, eta: m });
    }
    let n = e.len() as f64;
    let mut sq = 0.0;
    let mut logs = 0.0;
    for (ei, hi) in e.iter().zip(eta.iter()) {
        sq += ei * ei;
        logs += hi.ln();
    }
    Ok(-0.5 * LN_2PI - 0.5 * sq / n + logs / n)
}

/// `Q_n(b)` only; cheaper than [`evaluate`].
pub fn value(b: &DVector<f64>, d: &DesignMatrices) -> Result<f64> {
    check_dim(b, d)?;
    value_from(&(&d.level * b), &(&d.slope * b))
}

/// Value, score and Hessian at `b`.
pub fn evaluate(b: &DVector<f64>, d: &DesignMatrices) -> Result<LikelihoodReport> {
    check_dim(b, d)?;
    let e = &d.level * b;
    let eta = &d.slope * b;
    let value = value_from(&e, &eta)?;
    let n = d.n() as f64;
    let inv_eta = eta.map(|v| 1.0 / v);
    let score = (d.slope.tr_mul(&inv_eta) - d.level.tr_mul(&e)) / n;
    let mut scaled = d.slope.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(inv_eta.iter()) {
        row *= *w;
    }
    let hessian = -(d.level.tr_mul(&d.level) + scaled.tr_mul(&scaled)) / n;
    Ok(LikelihoodReport { value, score, hessian, e, eta })
}

/// Per-observation scores `ψ_i` as the rows of an n × JK matrix.
pub fn score_rows(b: &DVector<f64>, d: &DesignMatrices) -> Result<DMatrix<f64>> {
    check_dim(b, d)?;
    let e = &d.level * b;
    let eta = &d.slope * b;
    let (row, m) = min_eta(&eta);
    if !(m > 0.0) {
        return Err(GtrError::DomainViolation { row, eta: m });
    }
    let mut psi = d.slope.clone();
    for i in 0..d.n() {
        let inv = 1.0 / eta[i];
        for l in 0..d.jk() {
            psi[(i, l)] = psi[(i, l)] * inv - d.level[(i, l)] * e[i];
        }
    }
    Ok(psi)
}

pub(crate) fn weighted_l1(b: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    b.iter().zip(weights.iter()).map(|(bl, wl)| wl * bl.abs()).sum()
}

/// Adaptive-Lasso objective in per-observation units:
/// `Q_n(b) − (λ/n) Σ w_l |b_l|`, whose maximizer is that of
/// `n Q_n(b) − λ Σ w_l |b_l|`.
pub fn penalized_value(b: &DVector<f64>, d: &DesignMatrices, lambda: f64, weights: &DVector<f64>) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(GtrError::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    if weights.len() != d.jk() {
        return Err(GtrError::DimensionMismatch { expected: d.jk(), got: weights.len() });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(GtrError::InvalidArgument("weights must be non-negative".into()));
    }
    let q = value(b, d)?;
    Ok(q - lambda / d.n() as f64 * weighted_l1(b, weights))
}
