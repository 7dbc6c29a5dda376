use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the regularizing affine-scaling trust-region solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrConfig {
    /// Acceptance threshold on the actual/predicted reduction ratio, in `[0.25, 1)`.
    pub beta: f64,
    /// Threshold on the model reduction relative to the Cauchy point, in `(0, 1)`.
    pub beta_c: f64,
    /// Radius shrink factor on rejection.
    pub gamma: f64,
    /// Linearisation quality level `q` used by the radius update.
    pub q: f64,
    /// Discrepancy factor; must satisfy `tau * q > 1`.
    pub tau: f64,
    /// Step-back factor toward the boundary, in `(0, 1)`.
    pub stepback: f64,
    pub mu0: f64,
    pub theta: f64,
    pub eta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Multiplier used when the Gauss-Newton step already lies inside the region.
    pub alpha_floor: f64,
    pub max_iter: usize,
    pub max_inner: usize,
    /// Relative residual change counted as stagnant.
    pub stagnation_tol: f64,
    /// Consecutive stagnant iterations that stop the solver.
    pub stagnation_window: usize,
}

impl Default for TrConfig {
    fn default() -> Self {
        TrConfig {
            beta: 0.25,
            beta_c: 0.1,
            gamma: 0.5,
            q: 0.5,
            tau: 2.1,
            stepback: 0.995,
            mu0: 0.01,
            theta: 0.5,
            eta: 0.5,
            delta_min: 1e-8,
            delta_max: 10.0,
            alpha_floor: 1e-10,
            max_iter: 200,
            max_inner: 30,
            stagnation_tol: 1e-6,
            stagnation_window: 5,
        }
    }
}

fn open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {x} must lie in (0, 1)")))
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.25..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta = {} must lie in [0.25, 1)", self.beta)));
        }
        open_unit("beta_c", self.beta_c)?;
        open_unit("gamma", self.gamma)?;
        open_unit("q", self.q)?;
        open_unit("stepback", self.stepback)?;
        open_unit("theta", self.theta)?;
        open_unit("eta", self.eta)?;
        if !(self.tau * self.q > 1.0) {
            return Err(Error::Config(format!("tau * q = {} must exceed 1", self.tau * self.q)));
        }
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max && self.delta_max.is_finite()) {
            return Err(Error::Config("need 0 < delta_min < delta_max < inf".into()));
        }
        if !(self.mu0 > 0.0 && self.alpha_floor > 0.0) {
            return Err(Error::Config("mu0 and alpha_floor must be positive".into()));
        }
        if self.max_inner == 0 || self.stagnation_window == 0 {
            return Err(Error::Config("max_inner and stagnation_window must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters of the projected Levenberg-Marquardt baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    /// Initial damping relative to the largest diagonal entry of `JᵀJ`.
    pub alpha0: f64,
    /// Damping multiplier after a rejected step.
    pub nu_up: f64,
    /// Damping divisor after an accepted step.
    pub nu_down: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub max_inner: usize,
    pub stagnation_tol: f64,
    pub stagnation_window: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            alpha0: 1e-3,
            nu_up: 10.0,
            nu_down: 10.0,
            tau: 2.1,
            max_iter: 200,
            max_inner: 30,
            stagnation_tol: 1e-6,
            stagnation_window: 5,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.nu_up > 1.0 && self.nu_down > 1.0) {
            return Err(Error::Config("need alpha0 > 0, nu_up > 1, nu_down > 1".into()));
        }
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!("tau = {} must exceed 1", self.tau)));
        }
        if self.max_inner == 0 || self.stagnation_window == 0 {
            return Err(Error::Config("max_inner and stagnation_window must be positive".into()));
        }
        Ok(())
    }
}
