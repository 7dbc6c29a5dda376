use std::time::Instant;

use nalgebra::DVector;

use super::result::{FitResult, IterationRecord, StopReason};
use super::steps::{cauchy_point, discrepancy_stop, feasible_step, quadratic_model, radius_update, trust_radius};
use super::{solve_secular, sym_norm, Model, ResidualProblem, StopRule, TrConfig};
use crate::error::{Error, Result};

/// Shared stopping bookkeeping for both solvers.
pub(crate) struct Monitor<'a> {
    tau: f64,
    delta: f64,
    tol: f64,
    window: usize,
    max_iter: usize,
    rule: Option<StopRule<'a>>,
    stagnant: usize,
    residuals: Vec<f64>,
}

impl<'a> Monitor<'a> {
    pub(crate) fn new(
        tau: f64,
        delta: f64,
        tol: f64,
        window: usize,
        max_iter: usize,
        rule: Option<StopRule<'a>>,
        res0: f64,
    ) -> Self {
        Monitor {
            tau,
            delta,
            tol,
            window,
            max_iter,
            rule,
            stagnant: 0,
            residuals: vec![res0],
        }
    }

    /// Checked before every iteration, in order: discrepancy, caller rule, stagnation,
    /// iteration budget.
    pub(crate) fn check(&self, iterations: usize) -> Option<StopReason> {
        let res = *self.residuals.last().expect("non-empty");
        if discrepancy_stop(res, self.delta, self.tau) {
            return Some(StopReason::Discrepancy);
        }
        if let Some(rule) = self.rule {
            if rule(&self.residuals) {
                return Some(StopReason::ThresholdRule);
            }
        }
        if self.stagnant >= self.window {
            return Some(StopReason::Stagnation);
        }
        if iterations >= self.max_iter {
            return Some(StopReason::MaxIter);
        }
        None
    }

    pub(crate) fn accepted(&mut self, res: f64) {
        let prev = *self.residuals.last().expect("non-empty");
        let change = if prev > 0.0 { (prev - res).abs() / prev } else { 0.0 };
        if change < self.tol {
            self.stagnant += 1;
        } else {
            self.stagnant = 0;
        }
        self.residuals.push(res);
    }
}

/// Largest Cauchy-point model decrease, relative to `Φ`, still treated as stationary.
pub(crate) const STATIONARY_DECREASE: f64 = 1e-10;

/// Regularizing affine-scaling trust-region method for `min ½‖y^δ − F(k)‖²`, `k ≥ 0`.
///
/// Per outer iteration, with `B = JᵀJ` and `g = Jᵀ(F − y^δ)` at the current iterate:
///
/// 1. `Δ = clamp(max(μ‖F − y^δ‖, 1.2(1 − q)‖g‖/‖B‖), Δ_min, Δ_max)`;
/// 2. repeat: solve the secular equation for `p(α)` with `‖p‖ = Δ`, pull it back to a
///    strictly feasible `p̄`, build the scaled Cauchy point `p_C`, and compute
///    `ρ_C = m(p̄)/m(p_C)` and `ρ = (Φ(k + p̄) − Φ(k))/m(p̄)`; shrink `Δ` by `γ` until
///    `ρ_C > β_C` and `ρ > β`;
/// 3. accept `k + p̄` and update `μ` from `q_j = ‖y^δ − F − J p̄‖ / ‖y^δ − F‖`.
///
/// Every iterate stays strictly positive. A non-positive `m(p_C)` or `m(p̄)` counts as a
/// failed trial.
pub fn reg_as_tr<M: Model>(
    problem: &ResidualProblem<M>,
    k0: &[f64],
    cfg: &TrConfig,
    rule: Option<StopRule<'_>>,
) -> Result<FitResult> {
    cfg.validate()?;
    if k0.len() != problem.model.n_params() {
        return Err(Error::Dimension(format!(
            "initial point has {} entries, model expects {}",
            k0.len(),
            problem.model.n_params()
        )));
    }
    if k0.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParams("initial point must be strictly positive".into()));
    }
    let started = Instant::now();

    let mut k = DVector::from_column_slice(k0);
    let (mut r, mut j) = problem.residual_and_jacobian(&k)?;
    let mut res = r.norm();
    let mut mu = cfg.mu0;
    let mut history = Vec::new();
    let mut monitor = Monitor::new(
        cfg.tau,
        problem.delta,
        cfg.stagnation_tol,
        cfg.stagnation_window,
        cfg.max_iter,
        rule,
        res,
    );
    let initial_residual = res;

    let reason = loop {
        if let Some(reason) = monitor.check(history.len()) {
            break reason;
        }
        let b = j.tr_mul(&j);
        let g = -j.tr_mul(&r);
        let g_norm = g.norm();
        if g_norm == 0.0 || res <= problem.rounding_floor() {
            break StopReason::Stationary;
        }
        let mut delta = trust_radius(mu, res, g_norm, sym_norm(&b), cfg);
        let phi = 0.5 * res * res;

        let mut accepted = None;
        let mut last = (delta, cfg.alpha_floor, false, 0.0, 0.0, 1.0);
        let mut trials = 0;
        let mut first_decrease = f64::NAN;
        while trials < cfg.max_inner {
            trials += 1;
            let sec = solve_secular(&j, &r, delta, cfg.alpha_floor)?;
            if !sec.active {
                log::trace!("trust region inactive at Δ = {delta:e}; using α floor");
            }
            let p_bar = feasible_step(&k, &sec.step, cfg.stepback);
            let q_trial = if res > 0.0 {
                (&r - &j * &p_bar).norm() / res
            } else {
                0.0
            };
            last = (delta, sec.alpha, sec.active, sec.step.norm(), p_bar.norm(), q_trial);
            let p_c = cauchy_point(&k, &g, &j, delta, cfg.stepback)?;
            let m_c = quadratic_model(&j, &g, &p_c);
            let m_bar = quadratic_model(&j, &g, &p_bar);
            if trials == 1 {
                first_decrease = -m_c;
            }
            if m_c < 0.0 && m_bar < 0.0 {
                let rho_c = m_bar / m_c;
                let k_trial = &k + &p_bar;
                let r_trial = problem.residual(&k_trial)?;
                let phi_trial = 0.5 * r_trial.norm_squared();
                let rho = (phi_trial - phi) / m_bar;
                if rho_c > cfg.beta_c && rho > cfg.beta && k_trial.iter().all(|&x| x > 0.0) {
                    accepted = Some(k_trial);
                    break;
                }
            }
            delta *= cfg.gamma;
        }

        let (delta_used, alpha, active, step_norm, feasible_norm, q_last) = last;
        let Some(k_next) = accepted else {
            history.push(IterationRecord {
                k: k.as_slice().to_vec(),
                residual_norm: res,
                radius: delta_used,
                alpha,
                accepted: false,
                constraint_active: active,
                q_ratio: q_last,
                step_norm,
                feasible_step_norm: feasible_norm,
                trials,
            });
            // a model decrease at rounding level means no trial could pass the ratio test
            break if first_decrease <= STATIONARY_DECREASE * phi {
                StopReason::Stationary
            } else {
                StopReason::Stalled
            };
        };

        let q_j = q_last;
        k = k_next;
        (r, j) = problem.residual_and_jacobian(&k)?;
        res = r.norm();
        // the next iteration recomputes Δ from μ at the new point
        (mu, _) = radius_update(mu, q_j, res, 0.0, 1.0, cfg);
        monitor.accepted(res);
        history.push(IterationRecord {
            k: k.as_slice().to_vec(),
            residual_norm: res,
            radius: delta_used,
            alpha,
            accepted: true,
            constraint_active: active,
            q_ratio: q_j,
            step_norm,
            feasible_step_norm: feasible_norm,
            trials,
        });
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
