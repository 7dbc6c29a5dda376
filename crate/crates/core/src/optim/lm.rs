use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::result::{FitResult, IterationRecord, StopReason};
use super::tr::{Monitor, STATIONARY_DECREASE};
use super::{LmConfig, Model, ResidualProblem, StopRule};
use crate::error::{Error, Result};

/// Projected Levenberg-Marquardt.
///
/// Trial steps solve `(JᵀJ + αI) p = Jᵀ(y^δ − F)`; the trial point is projected onto
/// `k ≥ 0`. A trial that lowers `Φ` is accepted and `α` is divided by `nu_down`, otherwise
/// `α` is multiplied by `nu_up`. Stopping follows the same rules as [`super::reg_as_tr`].
pub fn projected_lm<M: Model>(
    problem: &ResidualProblem<M>,
    k0: &[f64],
    cfg: &LmConfig,
    rule: Option<StopRule<'_>>,
) -> Result<FitResult> {
    cfg.validate()?;
    let n = problem.model.n_params();
    if k0.len() != n {
        return Err(Error::Dimension(format!(
            "initial point has {} entries, model expects {n}",
            k0.len()
        )));
    }
    if k0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }
    let started = Instant::now();

    let mut k = DVector::from_iterator(n, k0.iter().map(|x| x.max(0.0)));
    let (mut r, mut j) = problem.residual_and_jacobian(&k)?;
    let mut res = r.norm();
    let initial_residual = res;
    let mut alpha = {
        let b = j.tr_mul(&j);
        let scale = b.diagonal().amax();
        cfg.alpha0 * if scale > 0.0 { scale } else { 1.0 }
    };
    let mut monitor = Monitor::new(
        cfg.tau,
        problem.delta,
        cfg.stagnation_tol,
        cfg.stagnation_window,
        cfg.max_iter,
        rule,
        res,
    );
    let mut history = Vec::new();

    let reason = loop {
        if let Some(reason) = monitor.check(history.len()) {
            break reason;
        }
        let b = j.tr_mul(&j);
        let rhs = j.tr_mul(&r);
        if rhs.iter().all(|&x| x == 0.0) || res <= problem.rounding_floor() {
            break StopReason::Stationary;
        }

        let mut accepted = None;
        let mut trials = 0;
        let mut step_norm = 0.0;
        let mut q = 1.0;
        let mut first_decrease = f64::NAN;
        while trials < cfg.max_inner {
            trials += 1;
            let shifted = &b + DMatrix::<f64>::identity(n, n) * alpha;
            let Some(chol) = shifted.cholesky() else {
                alpha *= cfg.nu_up;
                continue;
            };
            let p = chol.solve(&rhs);
            step_norm = p.norm();
            let k_trial = (&k + &p).map(|x| x.max(0.0));
            if first_decrease.is_nan() {
                let s = &k_trial - &k;
                first_decrease = s.dot(&rhs) - 0.5 * (&j * &s).norm_squared();
            }
            if res > 0.0 {
                q = (&r - &j * (&k_trial - &k)).norm() / res;
            }
            let r_trial = problem.residual(&k_trial)?;
            let res_trial = r_trial.norm();
            if res_trial < res {
                accepted = Some(k_trial);
                break;
            }
            alpha *= cfg.nu_up;
        }

        let Some(k_next) = accepted else {
            history.push(record(&k, res, step_norm, alpha, false, trials, q));
            break if first_decrease <= STATIONARY_DECREASE * 0.5 * res * res {
                StopReason::Stationary
            } else {
                StopReason::Stalled
            };
        };
        let alpha_used = alpha;
        alpha /= cfg.nu_down;
        k = k_next;
        (r, j) = problem.residual_and_jacobian(&k)?;
        res = r.norm();
        monitor.accepted(res);
        history.push(record(&k, res, step_norm, alpha_used, true, trials, q));
    };

    Ok(FitResult {
        k: k.as_slice().to_vec(),
        reason,
        initial_k: k0.to_vec(),
        initial_residual,
        history,
        elapsed: started.elapsed(),
    })
}

fn record(k: &DVector<f64>, res: f64, step: f64, alpha: f64, accepted: bool, trials: usize, q: f64) -> IterationRecord {
    IterationRecord {
        k: k.as_slice().to_vec(),
        residual_norm: res,
        radius: step,
        alpha,
        accepted,
        constraint_active: false,
        q_ratio: q,
        step_norm: step,
        feasible_step_norm: step,
        trials,
    }
}
