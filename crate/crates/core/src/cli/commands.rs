use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DVector;

use super::config::{CandidateConfig, RunConfig};
use super::data::{load_sample, Ingested};
use super::report::*;
use super::{CliError, DgpArg, EvalArgs, KindArg, SimulateArgs, Status};
use crate::dictionary::{build_dictionary, DesignMatrices, Dictionary, DictionarySpec};
use crate::drf::{default_u_grid, default_x_grid, DrfEvaluator, DrfKind, QgmReport};
use crate::duality::{check_lasso_kkt, default_kkt_tol, recover_dual};
use crate::inference::{gamma_psi, info_matrix_gap, sandwich_on, stein_diagnostics};
use crate::simulate::{self, DgpKind, DgpSpec, MelbourneSpec};
use crate::solver::{
    default_lambda_grid, fit_adaptive_lasso, fit_ml, fit_ml_with_repair, select_model, PathEntry, SelectConfig,
    SlopeConstraint,
};

/// Condition number of `TᵀT/n` above which the design is reported as near-singular.
const SINGULAR_CONDITION: f64 = 1e12;

/// Studentized Stein components beyond this are flagged.
const STEIN_FLAG: f64 = 3.0;

fn data_source(cfg: &RunConfig, ing: &Ingested) -> DataSource {
    let path = cfg.data.path.clone().unwrap_or_default();
    DataSource {
        path: std::fs::canonicalize(&path).unwrap_or(path),
        outcome: ing.names[0].clone(),
        covariates: ing.names[1..].to_vec(),
        lag: cfg.data.lag,
        n: ing.sample.len(),
    }
}

fn ingest(cfg: &RunConfig) -> Result<Ingested, CliError> {
    let ing = load_sample(&cfg.data)?;
    for w in &ing.warnings {
        warn!("{w}");
    }
    info!("read {} observations with {} covariates", ing.sample.len(), ing.sample.num_covariates());
    Ok(ing)
}

fn probe_spec(cfg: &RunConfig, fitted: &DictionarySpec) -> Result<DictionarySpec, CliError> {
    match &cfg.stein_probe {
        None => Ok(fitted.clone()),
        Some(c) => {
            let mut v = c.expand()?;
            if v.len() != 1 {
                return Err(CliError::Config("stein_probe must name a single dictionary".into()));
            }
            Ok(v.remove(0))
        }
    }
}

/// Everything about a fitted coefficient vector that goes into a report.
struct FitParts {
    estimator: Estimator,
    b: DVector<f64>,
    converged: bool,
    score_norm: f64,
    iterations: usize,
    value: f64,
    gram_condition: Option<f64>,
    gradient_fallback: bool,
    constraints: Vec<SlopeConstraint>,
    repair_rounds: usize,
    qgm: Option<QgmSummary>,
    penalty: Option<PenaltySummary>,
    path: Option<Vec<PathEntry>>,
    /// Coordinates the sandwich is computed on; all when `None`.
    active: Option<Vec<usize>>,
}

fn build_report(
    dict: &Dictionary,
    d: &DesignMatrices,
    data: DataSource,
    parts: FitParts,
    probe: &DictionarySpec,
    seed: u64,
) -> Result<FitReport, CliError> {
    let b = &parts.b;
    let cert = recover_dual(b, d)?;
    let mut covariance = None;
    let mut diagnostics = None;
    if parts.converged {
        let active = parts.active.clone().unwrap_or_else(|| (0..d.jk()).collect());
        match sandwich_on(b, d, &active) {
            Ok(s) => {
                let se_std = s.standard_errors();
                let se_raw = dict.to_raw_covariance(&s.cov).diagonal().map(|v| v.max(0.0).sqrt());
                covariance = Some(CovarianceSummary {
                    kind: s.which,
                    pseudo_inverse: s.pseudo_inverse,
                    cov_std: to_rows(&s.cov),
                    se_std: se_std.as_slice().to_vec(),
                    se_raw: se_raw.as_slice().to_vec(),
                });
            }
            Err(e) => warn!("no covariance: {e}"),
        }
        let (gamma, psi) = gamma_psi(b, d)?;
        match stein_diagnostics(b, d, probe) {
            Ok(stein) => diagnostics = Some(Diagnostics { info_matrix_gap: info_matrix_gap(&gamma, &psi), stein }),
            Err(e) => warn!("Stein diagnostics unavailable: {e}"),
        }
    }
    let report = FitReport {
        schema: FIT_SCHEMA.into(),
        label: dict.spec().label(),
        estimator: parts.estimator,
        dictionary: dict.resolved().clone(),
        data,
        b_std: b.as_slice().to_vec(),
        b_raw: dict.to_raw_coefficients(b).as_slice().to_vec(),
        covariance,
        convergence: Convergence {
            converged: parts.converged,
            score_norm: parts.score_norm,
            iterations: parts.iterations,
            value: parts.value,
            loglik_raw: d.raw_loglik(parts.value),
            gram_condition: parts.gram_condition,
            gradient_fallback: parts.gradient_fallback,
        },
        constraints: parts.constraints,
        repair_rounds: parts.repair_rounds,
        qgm: parts.qgm,
        penalty: parts.penalty,
        path: parts.path,
        duality: DualitySummary::from(&cert),
        diagnostics,
        seed,
    };
    report.validate()?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4e}"))
}

fn print_fit_summary(r: &FitReport) {
    let c = &r.convergence;
    println!("{} ({:?}), n = {}, {} coefficients", r.label, r.estimator, r.data.n, r.b_std.len());
    println!(
        "  converged: {}   score norm: {:.3e}   iterations: {}   log-likelihood: {:.6}",
        c.converged, c.score_norm, c.iterations, c.loglik_raw
    );
    println!(
        "  duality gap: {:.3e}   dual residual: {:.3e}",
        r.duality.gap, r.duality.constraint_residual
    );
    if let Some(q) = &r.qgm {
        println!(
            "  QGM: {} ({} violations on {}×{}){}",
            if q.passed { "pass" } else { "FAIL" },
            q.num_violations,
            q.x_points,
            q.u_points,
            if r.repair_rounds > 0 { format!(", {} repair rounds", r.repair_rounds) } else { String::new() }
        );
    }
    if let Some(p) = &r.penalty {
        println!("  λ = {}   BIC = {:.4}   active: {}   KKT: {}", p.lambda, p.bic, p.active_set.len(), p.kkt.passed);
    }
    if let Some(dg) = &r.diagnostics {
        println!(
            "  info-matrix gap: {:.4}   max |Stein z|: {:.3}",
            dg.info_matrix_gap, dg.stein.max_abs_studentized
        );
    }
    println!("  {:>4}  {:>14}  {:>12}", "l", "b (raw)", "se (raw)");
    for (l, b) in r.b_raw.iter().enumerate() {
        let se = r.covariance.as_ref().map(|c| c.se_raw[l]);
        println!("  {l:>4}  {b:>14.6}  {:>12}", fmt_opt(se));
    }
}

fn warn_if_singular(cond: f64) {
    if cond > SINGULAR_CONDITION {
        warn!("design is near-singular: condition number of TᵀT/n is {cond:.3e}; consider fewer basis functions");
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Status, CliError> {
    cfg.validate()?;
    let specs = cfg.candidate_specs()?;
    if specs.len() != 1 {
        return Err(CliError::Config(format!("fit takes exactly one candidate, got {}; use `select`", specs.len())));
    }
    let ing = ingest(cfg)?;
    let (dict, d) = build_dictionary(&specs[0], &ing.sample)?;
    let x_grid = default_x_grid(&dict, &d, cfg.grids.qgm_x_points);
    let u_grid = cfg.grids.qgm_u.clone().unwrap_or_else(default_u_grid);
    let (fit, qgm, rounds): (_, QgmReport, usize) = if cfg.repair.enabled {
        let o = fit_ml_with_repair(&dict, &d, &cfg.solver, &cfg.repair.config(), &x_grid, &u_grid)?;
        (o.fit, o.qgm, o.rounds)
    } else {
        let f = fit_ml(&dict, &d, &cfg.solver)?;
        let q = DrfEvaluator::new(dict.clone(), f.b_hat.clone(), None)?.qgm_check(&x_grid, &u_grid)?;
        (f, q, 0)
    };
    warn_if_singular(fit.gram_condition);
    let parts = FitParts {
        estimator: Estimator::MaximumLikelihood,
        b: fit.b_hat.clone(),
        converged: fit.converged,
        score_norm: fit.score_norm,
        iterations: fit.iterations,
        value: fit.value,
        gram_condition: Some(fit.gram_condition),
        gradient_fallback: fit.gradient_fallback,
        constraints: fit.constraints_added.clone(),
        repair_rounds: rounds,
        qgm: Some(QgmSummary::from(&qgm)),
        penalty: None,
        path: None,
        active: None,
    };
    let report = build_report(&dict, &d, data_source(cfg, &ing), parts, &probe_spec(cfg, &specs[0])?, cfg.seed)?;
    let mut run = RunDir::create(&cfg.output_dir)?;
    let path = run.write_json("fit.json", &report)?;
    print_fit_summary(&report);
    println!("wrote {}", path.display());
    Ok(if !fit.converged {
        Status::NotConverged
    } else if !qgm.passed {
        Status::QgmFailed
    } else {
        Status::Success
    })
}

/// Refits the winning λ of one candidate and assembles its full report.
fn candidate_report(
    cfg: &RunConfig,
    ing: &Ingested,
    spec: &DictionarySpec,
    path: &[PathEntry],
    entry: &PathEntry,
    qgm_dims: (usize, usize),
) -> Result<FitReport, CliError> {
    let (dict, d) = build_dictionary(spec, &ing.sample)?;
    let first = fit_ml(&dict, &d, &cfg.solver)?;
    let pf = fit_adaptive_lasso(&d, &cfg.solver, &first, entry.lambda, &dict.unpenalized())?;
    let drift = pf.b_al.iter().zip(&entry.b_al).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if drift > 1e-8 {
        warn!("{}: refit at λ = {} differs from the path by {drift:.2e}", spec.label(), entry.lambda);
    }
    let kkt = check_lasso_kkt(&pf, &d, default_kkt_tol(d.n()))?;
    let parts = FitParts {
        estimator: Estimator::AdaptiveLasso,
        b: pf.b_al.clone(),
        converged: pf.converged,
        score_norm: pf.kkt_residual,
        iterations: pf.iterations,
        value: pf.value,
        gram_condition: Some(first.gram_condition),
        gradient_fallback: first.gradient_fallback,
        constraints: Vec::new(),
        repair_rounds: 0,
        qgm: Some(QgmSummary {
            passed: entry.qgm_ok,
            num_violations: 0,
            x_points: qgm_dims.0,
            u_points: qgm_dims.1,
            examples: Vec::new(),
        }),
        penalty: Some(PenaltySummary { lambda: pf.lambda, active_set: pf.active_set.clone(), bic: pf.bic, kkt }),
        path: Some(path.to_vec()),
        active: Some(pf.active_set.clone()),
    };
    build_report(&dict, &d, data_source(cfg, ing), parts, &probe_spec(cfg, spec)?, cfg.seed)
}

pub fn cmd_select(cfg: &RunConfig) -> Result<Status, CliError> {
    cfg.validate()?;
    let specs = cfg.candidate_specs()?;
    let lambdas = cfg.lambdas.clone().unwrap_or_else(default_lambda_grid);
    let ing = ingest(cfg)?;
    let sel_cfg = SelectConfig {
        solver: cfg.solver.clone(),
        qgm_x_points: cfg.grids.qgm_x_points,
        qgm_u_grid: cfg.grids.qgm_u.clone(),
    };
    let u_points = cfg.grids.qgm_u.as_ref().map_or(default_u_grid().len(), Vec::len);
    let candidates: Vec<(DictionarySpec, Vec<f64>)> = specs.iter().map(|s| (s.clone(), lambdas.clone())).collect();
    info!("fitting {} candidates over {} penalty values", candidates.len(), lambdas.len());
    let sel = select_model(&candidates, &ing.sample, &sel_cfg)?;

    let mut run = RunDir::create(&cfg.output_dir)?;
    let mut artifacts = vec![None; sel.candidates.len()];
    let mut winner: Option<FitReport> = None;
    for c in &sel.candidates {
        let Some(best) = c.best else {
            warn!("candidate {} ({}) dropped: {}", c.spec_index, c.label, c.dropped.as_deref().unwrap_or("no admissible fit"));
            continue;
        };
        let x_points = if ing.sample.num_covariates() == 0 { 1 } else { cfg.grids.qgm_x_points };
        let report = candidate_report(cfg, &ing, &specs[c.spec_index], &c.path, &c.path[best], (x_points, u_points))?;
        let name = format!("candidate-{:03}.json", c.spec_index);
        run.write_json(&name, &report)?;
        artifacts[c.spec_index] = Some(name);
        if sel.ranking.first().map(|r| r.0) == Some(c.spec_index) {
            winner = Some(report);
        }
    }
    let ranking: Vec<RankedFit> = sel
        .ranking
        .iter()
        .map(|&(s, p)| {
            let c = &sel.candidates[s];
            RankedFit {
                spec_index: s,
                label: c.label.clone(),
                lambda: c.path[p].lambda,
                bic: c.path[p].bic,
                num_params: c.num_params,
                num_active: c.path[p].num_active,
            }
        })
        .collect();
    let report = SelectReport {
        schema: SELECT_SCHEMA.into(),
        data: data_source(cfg, &ing),
        lambdas,
        ranking: ranking.clone(),
        candidates: sel.candidates.clone(),
        artifacts,
    };
    let sel_path = run.write_json("selection.json", &report)?;

    println!("{:>4}  {:<32}  {:>10}  {:>14}  {:>7}", "rank", "candidate", "lambda", "BIC", "active");
    for (i, r) in ranking.iter().enumerate().take(20) {
        println!(
            "{:>4}  {:<32}  {:>10.4}  {:>14.4}  {:>3}/{:<3}",
            i + 1,
            r.label,
            r.lambda,
            r.bic,
            r.num_active,
            r.num_params
        );
    }
    println!("wrote {}", sel_path.display());
    match winner {
        Some(w) => {
            let p = run.write_json("fit.json", &w)?;
            println!("winner: {} ({} of {} coefficients nonzero); wrote {}", w.label, ranking[0].num_active, ranking[0].num_params, p.display());
            Ok(Status::Success)
        }
        None => {
            let all_nonconverged = sel.candidates.iter().all(|c| {
                c.path.iter().all(|p| !p.converged)
                    && c.dropped.as_deref().is_some_and(|m| m.contains("converge") || c.path.is_empty())
            });
            eprintln!("no candidate produced a QGM-passing penalized fit");
            Ok(if all_nonconverged { Status::NotConverged } else { Status::QgmFailed })
        }
    }
}

/// Parsed `eval` request.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRequest {
    pub fit: PathBuf,
    pub kind: DrfKind,
    /// Raw-unit covariate points; a default set when empty.
    pub x: Vec<Vec<f64>>,
    pub grid: Option<Vec<f64>>,
    pub grid_points: usize,
    pub level: f64,
    pub out: PathBuf,
}

impl EvalRequest {
    pub fn from_args(a: &EvalArgs) -> Result<Self, CliError> {
        let x = a
            .x
            .iter()
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad --x value `{s}`"))))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let kind = match a.kind {
            KindArg::Cdf => DrfKind::Cdf,
            KindArg::Pdf => DrfKind::Pdf,
            KindArg::Quantile => DrfKind::Quantile,
        };
        Ok(Self { fit: a.fit.clone(), kind, x, grid: a.grid.clone(), grid_points: a.grid_points, level: a.level, out: a.out.clone() })
    }
}

/// `0.05, 0.10, …, 0.95`.
pub fn default_band_levels() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

pub fn cmd_eval(req: &EvalRequest) -> Result<Status, CliError> {
    if !(req.level > 0.0 && req.level < 1.0) {
        return Err(CliError::Config("--level must lie in (0, 1)".into()));
    }
    let fit = load_fit(&req.fit)?;
    let dict = fit.dictionary()?;
    let st = dict.standardization().clone();
    let p = dict.num_covariates();
    let cov = fit.cov_std()?;
    if cov.is_none() {
        return Err(CliError::Artifact(format!("{} stores no covariance, so bands are unavailable", req.fit.display())));
    }
    let eval = DrfEvaluator::new(dict, fit.b_std(), cov)?;
    let xs: Vec<Vec<f64>> = if req.x.is_empty() {
        if p == 1 {
            let (lo, hi) = st.x_ranges[0];
            (0..5).map(|i| st.x_from_std(&[lo + (hi - lo) * (i as f64 + 0.5) / 5.0])).collect()
        } else {
            vec![st.x_means.clone()]
        }
    } else {
        req.x.clone()
    };
    if let Some(bad) = xs.iter().find(|x| x.len() != p) {
        return Err(CliError::Config(format!("--x has {} values, the fit has {p} covariates", bad.len())));
    }
    let grid = match (&req.grid, req.kind) {
        (Some(g), _) => g.clone(),
        (None, DrfKind::Quantile) => default_band_levels(),
        (None, _) => {
            let (lo, hi) = (st.y_from_std(st.y_range.0), st.y_from_std(st.y_range.1));
            let m = req.grid_points.max(2);
            (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
        }
    };
    let rows = eval.band_grid(&xs, &grid, req.kind, req.level)?;
    let x_names: Vec<String> = if fit.data.covariates.len() == p {
        fit.data.covariates.clone()
    } else {
        (1..=p).map(|c| format!("x{c}")).collect()
    };
    let grid_name = if req.kind == DrfKind::Quantile { "u".to_string() } else { fit.data.outcome.clone() };
    let mut header = vec!["kind".to_string()];
    header.extend(x_names);
    header.extend([grid_name, "estimate".into(), "lower".into(), "upper".into()]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.kind.as_str().to_string()];
            v.extend(r.x.iter().map(|x| format!("{x:?}")));
            v.extend([r.grid, r.estimate, r.lower, r.upper].iter().map(|x| format!("{x:?}")));
            v
        })
        .collect();
    let mut run = RunDir::create(&req.out)?;
    let path = run.write_csv(&format!("bands-{}.csv", req.kind.as_str()), &header, &body)?;
    println!("{} rows ({} x values × {} grid points); wrote {}", rows.len(), xs.len(), grid.len(), path.display());
    Ok(Status::Success)
}

pub fn cmd_diagnose(
    fit_path: &Path,
    data: Option<&Path>,
    probe: Option<&str>,
    qgm_x_points: usize,
    out: &Path,
) -> Result<Status, CliError> {
    let fit = load_fit(fit_path)?;
    let dict = fit.dictionary()?;
    let data_cfg = super::config::DataConfig {
        path: Some(data.map_or_else(|| fit.data.path.clone(), Path::to_path_buf)),
        outcome: Some(fit.data.outcome.clone()),
        covariates: Some(if fit.data.lag { fit.data.covariates[1..].to_vec() } else { fit.data.covariates.clone() }),
        lag: fit.data.lag,
    };
    let ing = load_sample(&data_cfg)?;
    if ing.sample.len() != fit.data.n {
        warn!("data has {} rows, the fit used {}", ing.sample.len(), fit.data.n);
    }
    let d = dict.design(&ing.sample)?;
    let b = fit.b_std();
    let cert = recover_dual(&b, &d)?;
    let score_norm = match &fit.penalty {
        Some(_) => fit.convergence.score_norm,
        None => crate::objective::evaluate(&b, &d)?.score.amax(),
    };
    let (gamma, psi) = gamma_psi(&b, &d)?;
    let probe_spec = match probe {
        Some(s) => CandidateConfig::Preset(s.into()).expand()?.remove(0),
        None => dict.spec().clone(),
    };
    let stein = stein_diagnostics(&b, &d, &probe_spec)?;
    let flagged: Vec<usize> =
        stein.studentized.iter().enumerate().filter(|(_, z)| z.abs() > STEIN_FLAG).map(|(l, _)| l).collect();
    let x_grid = default_x_grid(&dict, &d, qgm_x_points);
    let qgm = DrfEvaluator::new(dict, b, None)?.qgm_check(&x_grid, &default_u_grid())?;
    let report = DiagnoseReport {
        schema: DIAGNOSE_SCHEMA.into(),
        fit: fit_path.display().to_string(),
        duality: DualitySummary::from(&cert),
        score_norm,
        info_matrix_gap: info_matrix_gap(&gamma, &psi),
        stein,
        flagged,
        qgm: QgmSummary::from(&qgm),
    };
    let mut run = RunDir::create(out)?;
    let path = run.write_json("diagnostics.json", &report)?;
    println!("{} ({} observations)", fit.label, d.n());
    println!("  duality gap: {:.3e}   dual residual: {:.3e}   score norm: {:.3e}", cert.gap, cert.constraint_residual, score_norm);
    println!("  information-matrix gap ‖Γ+Ψ‖/‖Ψ‖: {:.4}", report.info_matrix_gap);
    println!("  QGM: {} ({} violations)", if qgm.passed { "pass" } else { "FAIL" }, qgm.violations.len());
    println!("  Stein moments ({}):", report.stein.probe_label);
    println!("  {:>4}  {:>12}  {:>9}", "l", "moment", "z");
    for (l, (m, z)) in report.stein.moments.iter().zip(&report.stein.studentized).enumerate() {
        println!("  {l:>4}  {m:>12.4e}  {z:>9.3}{}", if z.abs() > STEIN_FLAG { "  *" } else { "" });
    }
    println!("wrote {}", path.display());
    Ok(Status::Success)
}

/// What `simulate` should draw.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulateRequest {
    Dgp { spec: DgpSpec, out: PathBuf },
    Series { spec: MelbourneSpec, out: PathBuf },
}

impl SimulateRequest {
    pub fn from_args(a: &SimulateArgs) -> Result<Self, CliError> {
        let from_file = match &a.spec {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let value: toml::Table =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Some(value)
            }
            None => None,
        };
        let file_kind = from_file.as_ref().and_then(|t| t.get("kind")).and_then(|k| k.as_str()).map(str::to_string);
        let series = a.kind == Some(DgpArg::MelbourneLike) || file_kind.as_deref() == Some("melbourne-like");
        if series {
            let mut spec: MelbourneSpec = match from_file {
                Some(mut t) => {
                    t.remove("kind");
                    t.try_into().map_err(|e| CliError::Config(format!("simulation spec: {e}")))?
                }
                None => MelbourneSpec::default(),
            };
            if let Some(n) = a.n {
                spec.length = n;
            }
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            return Ok(SimulateRequest::Series { spec, out: a.out.clone() });
        }
        let mut spec: DgpSpec = match from_file {
            Some(mut t) => {
                t.entry("n").or_insert(toml::Value::Integer(a.n.unwrap_or(1000) as i64));
                t.entry("seed").or_insert(toml::Value::Integer(a.seed.unwrap_or(0) as i64));
                t.try_into().map_err(|e| CliError::Config(format!("simulation spec: {e}")))?
            }
            None => {
                let kind = match a.kind {
                    Some(DgpArg::BaselineGaussian) | None => DgpKind::BaselineGaussian { covariates: a.covariates.unwrap_or(1) },
                    Some(DgpArg::LinearLocationScale) => DgpKind::LinearLocationScale,
                    Some(DgpArg::BimodalMisspec) => {
                        DgpKind::BimodalMisspec { separation: a.separation.unwrap_or(2.0), noise_sd: a.noise_sd.unwrap_or(0.5) }
                    }
                    Some(DgpArg::MelbourneLike) => unreachable!(),
                };
                DgpSpec { n: 1000, seed: 0, kind }
            }
        };
        if let Some(n) = a.n {
            spec.n = n;
        }
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        Ok(SimulateRequest::Dgp { spec, out: a.out.clone() })
    }
}

fn create_file(path: &Path) -> Result<std::fs::File, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// `data.csv` → `data.b0.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("b0.json")
}

pub fn cmd_simulate(req: &SimulateRequest) -> Result<Status, CliError> {
    match req {
        SimulateRequest::Series { spec, out } => {
            let series = simulate::melbourne_like(spec)?;
            let mut w = csv::Writer::from_writer(create_file(out)?);
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(["y"]).map_err(io)?;
            for v in &series {
                w.write_record([format!("{v:?}")]).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {} series values to {}", series.len(), out.display());
        }
        SimulateRequest::Dgp { spec, out } => {
            let sample = simulate::generate(spec)?;
            let names = simulate::default_names(sample.num_covariates());
            simulate::write_sample_csv(&sample, &names, create_file(out)?)?;
            println!("wrote {} rows to {}", sample.len(), out.display());
            if let Some(b0) = simulate::true_b0(spec) {
                let dictionary = match &spec.kind {
                    DgpKind::CustomB0 { dictionary, .. } => dictionary.clone(),
                    _ => DictionarySpec::linear_linear().with_standardize(false),
                };
                let side = B0Sidecar { schema: B0_SCHEMA.into(), dgp: spec.clone(), dictionary, b0 };
                let path = sidecar_path(out);
                let text = serde_json::to_string_pretty(&side).map_err(|e| CliError::Io(e.to_string()))?;
                std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
                println!("wrote true coefficients to {}", path.display());
            }
        }
    }
    Ok(Status::Success)
}
