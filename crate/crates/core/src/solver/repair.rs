use log::info;
use serde::{Deserialize, Serialize};

use super::{fit_ml, fit_ml_constrained, FitResult, SlopeConstraint, SolverConfig};
use crate::bspline::equispaced;
use crate::dictionary::{DesignMatrices, Dictionary};
use crate::drf::{DrfEvaluator, QgmReport};
use crate::error::{GtrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    /// Lower bound imposed on `b′t` at each constraint point (standardized units).
    pub eps: f64,
    /// Points per axis in the first round; doubled every round.
    pub initial_grid: usize,
    pub max_rounds: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self { eps: 1e-3, initial_grid: 5, max_rounds: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub fit: FitResult,
    pub qgm: QgmReport,
    /// Constrained refits performed (0 when the plain fit already passed).
    pub rounds: usize,
}

/// Constraint points for one repair round: an `m × m` grid of (covariate,
/// outcome) values over the sample range, `m = initial_grid · 2^round`.
/// With no covariates only the outcome axis is gridded; with several
/// covariates the x-axis is an evenly spaced subsample of observed rows.
pub fn repair_grid(dict: &Dictionary, d: &DesignMatrices, cfg: &RepairConfig, round: usize) -> Vec<SlopeConstraint> {
    let m = cfg.initial_grid.max(2) << round;
    let st = dict.standardization();
    let ys = equispaced(st.y_range.0, st.y_range.1, m);
    let xs: Vec<Vec<f64>> = match dict.num_covariates() {
        0 => vec![vec![]],
        1 => equispaced(st.x_ranges[0].0, st.x_ranges[0].1, m).into_iter().map(|v| vec![v]).collect(),
        _ => {
            let mut rows: Vec<&Vec<f64>> = d.x.iter().collect();
            rows.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let n = rows.len();
            let m = m.min(n);
            (0..m).map(|i| rows[if m == 1 { 0 } else { i * (n - 1) / (m - 1) }].clone()).collect()
        }
    };
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for x in &xs {
        for &y in &ys {
            out.push(SlopeConstraint { x: x.clone(), y, eps: cfg.eps });
        }
    }
    out
}

/// Unpenalized fit followed by a QGM check on `(x_grid, u_grid)` (raw
/// covariate units). On failure the fit is redone with slope constraints on
/// successively finer grids until the check passes or the rounds run out.
pub fn fit_ml_with_repair(
    dict: &Dictionary,
    d: &DesignMatrices,
    cfg: &SolverConfig,
    repair: &RepairConfig,
    x_grid: &[Vec<f64>],
    u_grid: &[f64],
) -> Result<RepairOutcome> {
    if !(repair.eps > 0.0) || repair.initial_grid == 0 {
        return Err(GtrError::InvalidArgument(format!("invalid repair configuration: {repair:?}")));
    }
    let check = |fit: &FitResult| -> Result<QgmReport> {
        DrfEvaluator::new(dict.clone(), fit.b_hat.clone(), None)?.qgm_check(x_grid, u_grid)
    };
    let mut fit = fit_ml(dict, d, cfg)?;
    let mut qgm = check(&fit)?;
    fit.qgm_ok = Some(qgm.passed);
    let mut rounds = 0;
    while !qgm.passed && rounds < repair.max_rounds {
        let constraints = repair_grid(dict, d, repair, rounds);
        info!(
            "QGM failed at {} grid pairs; refitting with {} slope constraints",
            qgm.violations.len(),
            constraints.len()
        );
        fit = fit_ml_constrained(dict, d, cfg, &constraints)?;
        rounds += 1;
        qgm = check(&fit)?;
        fit.qgm_ok = Some(qgm.passed);
    }
    Ok(RepairOutcome { fit, qgm, rounds })
}
