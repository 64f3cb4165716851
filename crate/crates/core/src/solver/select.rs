use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_adaptive_lasso, fit_ml, PenalizedFit, SolverConfig};
use crate::dictionary::{build_dictionary, DictionarySpec, ResolvedDictionary, Sample};
use crate::drf::{default_u_grid, default_x_grid, DrfEvaluator};
use crate::error::{GtrError, Result};

/// Five log-spaced values from 0.001 to 0.5.
pub fn default_lambda_grid() -> Vec<f64> {
    let (lo, hi) = (0.001f64.ln(), 0.5f64.ln());
    (0..5).map(|i| (lo + (hi - lo) * i as f64 / 4.0).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub solver: SolverConfig,
    /// Covariate points of the QGM screen.
    pub qgm_x_points: usize,
    /// Quantile levels of the QGM screen; `None` is 0.01, …, 0.99.
    pub qgm_u_grid: Option<Vec<f64>>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), qgm_x_points: 201, qgm_u_grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub converged: bool,
    pub qgm_ok: bool,
    pub bic: f64,
    pub value: f64,
    pub num_active: usize,
    pub kkt_residual: f64,
    /// Standardized coefficients.
    pub b_al: Vec<f64>,
    pub active_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub spec_index: usize,
    pub label: String,
    pub num_params: usize,
    pub dictionary: Option<ResolvedDictionary>,
    pub path: Vec<PathEntry>,
    /// Index into `path` of the lowest admissible BIC.
    pub best: Option<usize>,
    /// Why the spec left the ranking, if it did.
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub candidates: Vec<CandidateReport>,
    /// `(spec_index, path index)` pairs ordered by BIC, ties by spec order.
    pub ranking: Vec<(usize, usize)>,
}

impl SelectionReport {
    pub fn best(&self) -> Option<(&CandidateReport, &PathEntry)> {
        self.ranking.first().map(|&(s, p)| (&self.candidates[s], &self.candidates[s].path[p]))
    }
}

fn run_candidate(index: usize, spec: &DictionarySpec, lambdas: &[f64], sample: &Sample, cfg: &SelectConfig) -> CandidateReport {
    let mut report = CandidateReport {
        spec_index: index,
        label: spec.label(),
        num_params: 0,
        dictionary: None,
        path: Vec::new(),
        best: None,
        dropped: None,
    };
    let (dict, d) = match build_dictionary(spec, sample) {
        Ok(v) => v,
        Err(e) => {
            report.dropped = Some(e.to_string());
            return report;
        }
    };
    report.num_params = dict.jk();
    report.dictionary = Some(dict.resolved().clone());
    let first = match fit_ml(&dict, &d, &cfg.solver) {
        Ok(f) if f.converged => f,
        Ok(_) => {
            report.dropped = Some(GtrError::FirstStepNotConverged.to_string());
            return report;
        }
        Err(e) => {
            report.dropped = Some(e.to_string());
            return report;
        }
    };
    let x_grid = default_x_grid(&dict, &d, cfg.qgm_x_points);
    let u_grid = cfg.qgm_u_grid.clone().unwrap_or_else(default_u_grid);
    let unpenalized = dict.unpenalized();

    let fits: Vec<Result<(PenalizedFit, bool)>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let fit = fit_adaptive_lasso(&d, &cfg.solver, &first, lambda, &unpenalized)?;
            let qgm = DrfEvaluator::new(dict.clone(), fit.b_al.clone(), None)?.qgm_check(&x_grid, &u_grid)?;
            Ok((fit, qgm.passed))
        })
        .collect();
    for (lambda, res) in lambdas.iter().zip(fits) {
        match res {
            Ok((fit, qgm_ok)) => report.path.push(PathEntry {
                lambda: *lambda,
                converged: fit.converged,
                qgm_ok,
                bic: fit.bic,
                value: fit.value,
                num_active: fit.active_set.len(),
                kkt_residual: fit.kkt_residual,
                b_al: fit.b_al.as_slice().to_vec(),
                active_set: fit.active_set,
            }),
            Err(e) => warn!("{}: λ = {lambda} failed: {e}", report.label),
        }
    }
    check_path_monotone(&report);
    report.best = report
        .path
        .iter()
        .enumerate()
        .filter(|(_, p)| p.converged && p.qgm_ok)
        .min_by(|a, b| a.1.bic.total_cmp(&b.1.bic))
        .map(|(i, _)| i);
    if report.best.is_none() {
        report.dropped = Some(GtrError::NoAdmissibleLambda(report.label.clone()).to_string());
    }
    report
}

fn check_path_monotone(report: &CandidateReport) {
    let mut sorted: Vec<&PathEntry> = report.path.iter().collect();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    for w in sorted.windows(2) {
        if w[1].num_active > w[0].num_active {
            info!(
                "{}: active set grows from {} to {} between λ = {} and λ = {}",
                report.label, w[0].num_active, w[1].num_active, w[0].lambda, w[1].lambda
            );
        }
    }
}

/// Fits every `(spec, λ grid)` candidate, screens by QGM and ranks the
/// admissible fits by BIC.
pub fn select_model(candidates: &[(DictionarySpec, Vec<f64>)], sample: &Sample, cfg: &SelectConfig) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(GtrError::InvalidArgument("no candidate specifications".into()));
    }
    cfg.solver.validate()?;
    for (spec, lambdas) in candidates {
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(GtrError::InvalidArgument(format!("{}: λ grid must be nonempty and positive", spec.label())));
        }
    }
    let reports: Vec<CandidateReport> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, (spec, lambdas))| run_candidate(i, spec, lambdas, sample, cfg))
        .collect();
    let mut ranking: Vec<(usize, usize)> = Vec::new();
    for r in &reports {
        if let Some(b) = r.best {
            ranking.push((r.spec_index, b));
        }
    }
    // stable: equal BIC keeps spec order
    ranking.sort_by(|a, b| reports[a.0].path[a.1].bic.total_cmp(&reports[b.0].path[b.1].bic));
    Ok(SelectionReport { candidates: reports, ranking })
}
