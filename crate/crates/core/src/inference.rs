//! Sandwich covariance and specification diagnostics.
//!
//! `Γ̂ = n⁻¹ Σ ∂ψ_i/∂b′` and `Ψ̂ = n⁻¹ Σ ψ_i ψ_i′` at the estimate; the
//! covariance of `b̂` is `Γ̂⁻¹ Ψ̂ Γ̂⁻¹ / n`. Under correct specification the
//! information matrix equality gives `Γ = −Ψ`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_dictionary, DesignMatrices, DictionarySpec, Sample};
use crate::error::{GtrError, Result};
use crate::linalg::{inverse_spd, pinv_sym, symmetrize};
use crate::objective;
use crate::solver::{FitResult, PenalizedFit};

/// Relative eigenvalue cutoff of the pseudo-inverse fallback.
const PINV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SandwichKind {
    Full,
    ActiveBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    /// `Γ̂` over the coordinates in `active` (all of them for a full sandwich).
    pub gamma_hat: DMatrix<f64>,
    pub psi_hat: DMatrix<f64>,
    /// Covariance of `b̂` in the original coordinate order; rows and columns
    /// of inactive coordinates are zero.
    pub cov: DMatrix<f64>,
    pub which: SandwichKind,
    pub active: Vec<usize>,
    /// `Γ̂` was not invertible and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

impl Sandwich {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// `(Γ̂, Ψ̂)` over all coordinates.
pub fn gamma_psi(b: &DVector<f64>, d: &DesignMatrices) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let report = objective::evaluate(b, d)?;
    let rows = objective::score_rows(b, d)?;
    let psi = rows.tr_mul(&rows) / d.n() as f64;
    Ok((report.hessian, psi))
}

fn block(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Sandwich restricted to the coordinates in `active`.
pub fn sandwich_on(b: &DVector<f64>, d: &DesignMatrices, active: &[usize]) -> Result<Sandwich> {
    let jk = d.jk();
    if active.iter().any(|&l| l >= jk) {
        return Err(GtrError::InvalidArgument("active index out of range".into()));
    }
    let (gamma_full, psi_full) = gamma_psi(b, d)?;
    let gamma = block(&gamma_full, active);
    let psi = block(&psi_full, active);
    let (ginv, pseudo) = match inverse_spd(&(-&gamma)) {
        Some(inv) => (-inv, false),
        None => {
            let (p, dropped) = pinv_sym(&gamma, PINV_TOL);
            warn!("Γ̂ is numerically singular ({dropped} eigenvalues dropped); using a pseudo-inverse");
            (p, true)
        }
    };
    let mut small = &ginv * &psi * &ginv / d.n() as f64;
    symmetrize(&mut small);
    let mut cov = DMatrix::zeros(jk, jk);
    for (r, &lr) in active.iter().enumerate() {
        for (c, &lc) in active.iter().enumerate() {
            cov[(lr, lc)] = small[(r, c)];
        }
    }
    let which = if active.len() == jk && active.iter().enumerate().all(|(i, &l)| i == l) {
        SandwichKind::Full
    } else {
        SandwichKind::ActiveBlock
    };
    Ok(Sandwich { gamma_hat: gamma, psi_hat: psi, cov, which, active: active.to_vec(), pseudo_inverse: pseudo })
}

pub fn sandwich(fit: &FitResult, d: &DesignMatrices) -> Result<Sandwich> {
    if !fit.converged {
        return Err(GtrError::InvalidArgument("sandwich needs a converged fit".into()));
    }
    let all: Vec<usize> = (0..d.jk()).collect();
    sandwich_on(&fit.b_hat, d, &all)
}

/// Active-block sandwich of a penalized fit (inactive coordinates are exact
/// zeros and get zero variance).
pub fn sandwich_penalized(fit: &PenalizedFit, d: &DesignMatrices) -> Result<Sandwich> {
    if !fit.converged {
        return Err(GtrError::InvalidArgument("sandwich needs a converged fit".into()));
    }
    sandwich_on(&fit.b_al, d, &fit.active_set)
}

/// `‖Γ̂ + Ψ̂‖_F / ‖Ψ̂‖_F`.
pub fn info_matrix_gap(gamma: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    (gamma + psi).norm() / psi.norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteinReport {
    /// `m̂ = n⁻¹ Σ {−T̃_i ê_i + t̃_i}`.
    pub moments: Vec<f64>,
    /// `√n m̂_l / sd_l` with `sd_l` the sample standard deviation of the
    /// summands (an i.i.d. studentization, not a formal test).
    pub studentized: Vec<f64>,
    pub max_abs_studentized: f64,
    pub studentization: String,
    pub probe_label: String,
}

/// Stein-score moments of the fitted residuals `ê_i = b̂′T_i` against a probe
/// dictionary built on `(x_i, ê_i)` with standardized covariates. The probe
/// is not standardized again, so its derivative column is exact in `ê`.
pub fn stein_diagnostics(b: &DVector<f64>, d: &DesignMatrices, probe: &DictionarySpec) -> Result<SteinReport> {
    let e = &d.level * b;
    let sample = Sample::new(e.as_slice().to_vec(), d.x.clone())?;
    let spec = probe.clone().with_standardize(false);
    let (_, pd) = build_dictionary(&spec, &sample)?;
    let n = d.n();
    let p = pd.jk();
    // summands −T̃_i ê_i + t̃_i
    let mut summ = DMatrix::zeros(n, p);
    for i in 0..n {
        for l in 0..p {
            summ[(i, l)] = -pd.level[(i, l)] * e[i] + pd.slope[(i, l)];
        }
    }
    let mut moments = Vec::with_capacity(p);
    let mut studentized = Vec::with_capacity(p);
    for l in 0..p {
        let col = summ.column(l);
        let m = col.mean();
        let var = if n > 1 { col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let z = if var > 0.0 { (n as f64).sqrt() * m / var.sqrt() } else if m == 0.0 { 0.0 } else { f64::INFINITY };
        moments.push(m);
        studentized.push(z);
    }
    let max_abs = studentized.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    Ok(SteinReport {
        moments,
        studentized,
        max_abs_studentized: max_abs,
        studentization: "iid sample variance of the summands".into(),
        probe_label: probe.label(),
    })
}
