use log::debug;
use nalgebra::{DMatrix, DVector};

use super::{gram_condition, initial_point, newton, Barrier, FitResult, Problem, SlopeConstraint, SolverConfig};
use crate::dictionary::{DesignMatrices, Dictionary};
use crate::error::{GtrError, Result};
use crate::objective;
use crate::solver::fit_ml;

/// Barrier weights, largest first. The last stage leaves active slacks of
/// order μ / multiplier.
const MU_SCHEDULE: [f64; 9] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// Maximizes `Q_n` subject to `b′t(x_c, y_c) ≥ ε_c` for every constraint.
///
/// An empty constraint list is exactly [`fit_ml`].
pub fn fit_ml_constrained(
    dict: &Dictionary,
    d: &DesignMatrices,
    cfg: &SolverConfig,
    constraints: &[SlopeConstraint],
) -> Result<FitResult> {
    if constraints.is_empty() {
        return fit_ml(dict, d, cfg);
    }
    cfg.validate()?;
    let barrier = Barrier::new(dict, constraints)?;

    // the canonical point has b′t ≡ 1; scale it until every slack is positive
    let eps_max = constraints.iter().map(|c| c.eps).fold(0.0, f64::max);
    let start = initial_point(d, dict) * (2.0 * eps_max).max(1.0);
    if !barrier_feasible(&barrier, &start) {
        return Err(GtrError::Infeasible(format!(
            "{} constraints, none strictly satisfiable from the canonical point",
            constraints.len()
        )));
    }

    let gram = gram_condition(d);
    let mut b = start;
    let mut total_iter = 0;
    let mut trace = Vec::new();
    let mut fallback = false;
    let mut last = None;
    for &mu in &MU_SCHEDULE {
        let out = newton(&Problem { d, barrier: Some((&barrier, mu)) }, b, cfg)?;
        debug!("barrier stage μ = {mu:e}: {} iterations, ‖∇‖ = {:e}", out.iterations, out.score_norm);
        total_iter += out.iterations;
        fallback |= out.gradient_fallback;
        trace.extend(out.trace.iter().cloned());
        b = out.b.clone();
        last = Some(out);
    }
    let out = last.expect("schedule is non-empty");
    let pol = polish(d, &barrier, &dict.canonical_point(), b, cfg)?;
    total_iter += pol.iterations;
    debug!(
        "polish: {} active constraints, ‖∇L‖ = {:e}, barrier stage ‖∇‖ = {:e}",
        pol.active, pol.lagrangian_norm, out.score_norm
    );
    let b = pol.b;
    let value = objective::value(&b, d)?;
    Ok(FitResult {
        b_hat: b,
        value,
        score_norm: if pol.accepted { pol.lagrangian_norm } else { out.score_norm },
        iterations: total_iter,
        converged: if pol.accepted { pol.converged } else { out.converged },
        constraints_added: constraints.to_vec(),
        qgm_ok: None,
        gradient_fallback: fallback,
        gram_condition: gram,
        trace,
    })
}

struct Polished {
    b: DVector<f64>,
    lagrangian_norm: f64,
    active: usize,
    iterations: usize,
    accepted: bool,
    converged: bool,
}

/// Slack below which a constraint is treated as binding after the barrier path.
const ACTIVE_SLACK: f64 = 1e-5;
const TARGET_MARGIN: f64 = 1e-11;

/// Newton on the KKT system of `max Q_n s.t. r_c′b = ε_c` for the binding
/// constraints. The barrier leaves binding slacks of order μ, which cannot be
/// resolved to `grad_tol` in floating point; this step lands on them exactly.
fn polish(
    d: &DesignMatrices,
    barrier: &Barrier,
    canonical: &DVector<f64>,
    start: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Polished> {
    let slack = barrier.slack(&start);
    let active: Vec<usize> = (0..slack.len()).filter(|&c| slack[c] <= ACTIVE_SLACK * (1.0 + barrier.eps[c])).collect();
    let m = active.len();
    let p = start.len();
    let r = DMatrix::from_fn(m, p, |i, j| barrier.rows[(active[i], j)]);
    // a hair above ε so independently recomputed slacks stay nonnegative
    let target = DVector::from_fn(m, |i, _| barrier.eps[active[i]] * (1.0 + TARGET_MARGIN) + TARGET_MARGIN);
    let start_copy = start.clone();
    let mut b = start;
    let mut iterations = 0;
    for _ in 0..50 {
        let rep = objective::evaluate(&b, d)?;
        let mut kkt = DMatrix::zeros(p + m, p + m);
        kkt.view_mut((0, 0), (p, p)).copy_from(&rep.hessian);
        kkt.view_mut((0, p), (p, m)).copy_from(&r.transpose());
        kkt.view_mut((p, 0), (m, p)).copy_from(&r);
        let mut rhs = DVector::zeros(p + m);
        rhs.rows_mut(0, p).copy_from(&(-&rep.score));
        rhs.rows_mut(p, m).copy_from(&(&target - &r * &b));
        let svd = kkt.svd(true, true);
        let Ok(sol) = svd.solve(&rhs, 1e-13 * svd.singular_values.max()) else {
            break;
        };
        let step = sol.rows(0, p).into_owned();
        let mut alpha = 1.0;
        let mut next = &b + &step;
        while !objective::in_domain(&next, d)? && alpha > 1e-10 {
            alpha *= 0.5;
            next = &b + &step * alpha;
        }
        if alpha <= 1e-10 {
            break;
        }
        b = next;
        iterations += 1;
        if step.amax() * alpha <= 1e-14 * (1.0 + b.amax()) {
            break;
        }
    }
    // lift every slack to at least zero along the canonical direction (r′c = 1 for all rows)
    let min_slack = barrier.slack(&b).min();
    if min_slack < 0.0 {
        b += canonical * (-min_slack * (1.0 + 1e-9) + f64::MIN_POSITIVE);
    }
    let polished = lagrangian_norm(d, &r, &b)?;
    let before = lagrangian_norm(d, &r, &start_copy)?;
    let feasible = barrier.slack(&b).iter().all(|s| *s >= 0.0);
    // near-singular designs can send the KKT step astray; keep the barrier point then
    let accepted = feasible && polished <= before;
    let (b, norm) = if accepted { (b, polished) } else { (start_copy, before) };
    Ok(Polished { b, lagrangian_norm: norm, active: m, iterations, accepted, converged: norm <= cfg.grad_tol })
}

/// `min_ν ‖score + R′ν‖_∞` with `ν` from least squares.
fn lagrangian_norm(d: &DesignMatrices, r: &DMatrix<f64>, b: &DVector<f64>) -> Result<f64> {
    let score = objective::evaluate(b, d)?.score;
    if r.nrows() == 0 {
        return Ok(score.amax());
    }
    let rt = r.transpose();
    let svd = rt.clone().svd(true, true);
    let nu = svd
        .solve(&(-&score), 1e-13 * svd.singular_values.max())
        .unwrap_or_else(|_| DVector::zeros(r.nrows()));
    Ok((&score + rt * nu).amax())
}

fn barrier_feasible(barrier: &Barrier, b: &DVector<f64>) -> bool {
    barrier.slack(b).iter().all(|s| *s > 0.0)
}
