//! Non-negatively constrained nonlinear least squares for ill-posed problems.
//!
//! Both solvers minimise `Φ(k) = ½‖y^δ − F(k)‖²` subject to `k ≥ 0` and stop by the
//! discrepancy principle when the noise level δ is known.
//!
//! * [`reg_as_tr`]: regularizing affine-scaling trust region. Each trial step solves the
//!   trust-region subproblem with the constraint active, so the multiplier `α_j` of the
//!   secular equation acts as a Levenberg-Marquardt/Tikhonov parameter. Steps are pulled
//!   back into the strictly positive orthant and must reduce the quadratic model at least as
//!   much as a scaled generalized Cauchy point.
//! * [`projected_lm`]: Levenberg-Marquardt with multiplicative damping and projection onto
//!   `k ≥ 0`, kept as a baseline.

mod config;
mod lm;
mod result;
mod secular;
mod steps;
mod tr;

pub use config::{LmConfig, TrConfig};
pub use lm::projected_lm;
pub use result::{FitResult, FitSummary, IterationRecord, StopReason};
pub use secular::{solve_secular, SecularSolution};
pub use steps::{
    cauchy_point, discrepancy_stop, feasible_step, quadratic_model, radius_update, scaling_matrix, trust_radius,
};
pub use tr::reg_as_tr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A differentiable forward map `F: R^n -> R^N`.
///
/// Implementations must be continuously differentiable on the non-negative orthant.
pub trait Model {
    fn n_params(&self) -> usize;
    fn n_obs(&self) -> usize;
    fn values(&self, k: &DVector<f64>) -> DVector<f64>;
    fn values_and_jacobian(&self, k: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
}

impl<M: Model + ?Sized> Model for &M {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn n_obs(&self) -> usize {
        (**self).n_obs()
    }
    fn values(&self, k: &DVector<f64>) -> DVector<f64> {
        (**self).values(k)
    }
    fn values_and_jacobian(&self, k: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (**self).values_and_jacobian(k)
    }
}

/// Extra caller-supplied stopping rule, evaluated on the residual-norm history
/// `[ε_0, …, ε_j]` before each iteration.
pub type StopRule<'a> = &'a dyn Fn(&[f64]) -> bool;

/// Model, noisy data `y^δ` and noise bound `δ`.
#[derive(Debug, Clone)]
pub struct ResidualProblem<M> {
    pub model: M,
    pub data: DVector<f64>,
    pub delta: f64,
}

impl<M: Model> ResidualProblem<M> {
    pub fn new(model: M, data: Vec<f64>, delta: f64) -> Result<Self> {
        if data.len() != model.n_obs() {
            return Err(Error::Dimension(format!(
                "data has {} entries, model produces {}",
                data.len(),
                model.n_obs()
            )));
        }
        if model.n_obs() < model.n_params() {
            return Err(Error::Dimension("fewer observations than parameters".into()));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!(
                "noise bound δ = {delta} must be finite and >= 0"
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("data"));
        }
        Ok(ResidualProblem {
            model,
            data: DVector::from_vec(data),
            delta,
        })
    }

    /// Residual norm that cannot be resolved in floating point relative to the data; a fit
    /// that reaches it is stationary.
    pub fn rounding_floor(&self) -> f64 {
        1e3 * f64::EPSILON * self.data.norm()
    }

    /// `y^δ − F(k)`.
    fn residual(&self, k: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.model.values(k);
        let r = &self.data - f;
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model values"));
        }
        Ok(r)
    }

    fn residual_and_jacobian(&self, k: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (f, j) = self.model.values_and_jacobian(k);
        let r = &self.data - f;
        if r.iter().chain(j.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model values or Jacobian"));
        }
        Ok((r, j))
    }
}

/// Spectral norm of a symmetric positive semi-definite matrix.
pub(crate) fn sym_norm(b: &DMatrix<f64>) -> f64 {
    b.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
}
