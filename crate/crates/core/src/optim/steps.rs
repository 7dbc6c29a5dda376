use nalgebra::{DMatrix, DVector};

use super::TrConfig;
use crate::error::{Error, Result};

/// Pulls a step back into the strictly positive orthant.
///
/// Components with `(k + p)_i > 0` are kept; the others become `t (Π(k + p) − k)_i = −t k_i`,
/// i.e. a fraction `t` of the way to the boundary. Hence `k + p̄ > 0` and `‖p̄‖ ≤ ‖p‖`.
pub fn feasible_step(k: &DVector<f64>, p: &DVector<f64>, t: f64) -> DVector<f64> {
    DVector::from_iterator(
        k.len(),
        k.iter().zip(p.iter()).map(|(&ki, &pi)| {
            if ki + pi > 0.0 {
                pi
            } else {
                t * ((ki + pi).max(0.0) - ki)
            }
        }),
    )
}

/// Diagonal of the affine scaling `D(k)`: `|k_i|` where `∇Φ(k)_i ≥ 0`, else 1.
pub fn scaling_matrix(k: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        k.len(),
        k.iter()
            .zip(grad.iter())
            .map(|(&ki, &gi)| if gi >= 0.0 { ki.abs() } else { 1.0 }),
    )
}

/// `m(p) = ½ pᵀ JᵀJ p + pᵀ g`.
pub fn quadratic_model(j: &DMatrix<f64>, g: &DVector<f64>, p: &DVector<f64>) -> f64 {
    0.5 * (j * p).norm_squared() + p.dot(g)
}

/// Generalized Cauchy point `p_C = −λ_C D g`.
///
/// The unconstrained step length is `λ̂ = min(Δ/‖Dg‖, ‖D^{1/2}g‖² / ‖J D g‖²)`. When
/// `k − λ̂ D g` is not strictly positive, the step stops at a fraction `t` of the distance
/// to the nearest boundary crossing.
pub fn cauchy_point(k: &DVector<f64>, g: &DVector<f64>, j: &DMatrix<f64>, delta: f64, t: f64) -> Result<DVector<f64>> {
    if g.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroGradient);
    }
    let d = scaling_matrix(k, g);
    let dg = d.component_mul(g);
    let dg_norm = dg.norm();
    if dg_norm == 0.0 {
        // every component with g_i > 0 sits on the boundary: no scaled descent
        return Ok(DVector::zeros(k.len()));
    }
    let curvature = (j * &dg).norm_squared();
    let gdg = g.dot(&dg);
    let radius_len = delta / dg_norm;
    let lambda_hat = if curvature > 0.0 {
        radius_len.min(gdg / curvature)
    } else {
        radius_len
    };

    let interior = k.iter().zip(dg.iter()).all(|(&ki, &di)| ki - lambda_hat * di > 0.0);
    let lambda = if interior {
        lambda_hat
    } else {
        let to_boundary = k
            .iter()
            .zip(dg.iter())
            .filter(|(_, &di)| di > 0.0)
            .map(|(&ki, &di)| ki / di)
            .fold(f64::INFINITY, f64::min);
        t * to_boundary
    };
    Ok(-dg * lambda)
}

/// Discrepancy principle: `‖y^δ − F(k)‖ ≤ τ δ`, never satisfied for exact data.
pub fn discrepancy_stop(res_norm: f64, delta: f64, tau: f64) -> bool {
    delta > 0.0 && res_norm <= tau * delta
}

/// `clamp(max(μ ‖F − y^δ‖, 1.2 (1 − q) ‖g‖ / ‖B‖), Δ_min, Δ_max)`.
pub fn trust_radius(mu: f64, res_norm: f64, grad_norm: f64, b_norm: f64, cfg: &TrConfig) -> f64 {
    let curvature_term = if b_norm > 0.0 {
        1.2 * (1.0 - cfg.q) * grad_norm / b_norm
    } else {
        f64::INFINITY
    };
    (mu * res_norm).max(curvature_term).clamp(cfg.delta_min, cfg.delta_max)
}

/// Multiplier and radius after a successful iteration.
///
/// `μ` shrinks by `θ` when the linearised residual ratio `q_j` falls below `q`, grows by
/// `1/η` above `1.1 q` and is kept otherwise; the radius then follows [`trust_radius`] at
/// the new iterate.
pub fn radius_update(
    mu: f64,
    q_j: f64,
    res_norm_next: f64,
    grad_norm_next: f64,
    b_norm_next: f64,
    cfg: &TrConfig,
) -> (f64, f64) {
    let mu_next = if q_j < cfg.q {
        cfg.theta * mu
    } else if q_j > 1.1 * cfg.q {
        mu / cfg.eta
    } else {
        mu
    };
    (
        mu_next,
        trust_radius(mu_next, res_norm_next, grad_norm_next, b_norm_next, cfg),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn feasible_step_examples() {
        let k = v(&[1.0, 1.0, 1.0, 1.0]);
        let p = v(&[-0.5, 0.1, 0.0, 0.2]);
        assert_eq!(feasible_step(&k, &p, 0.9), p);

        let k = v(&[0.1, 1.0, 1.0, 1.0]);
        let p = v(&[-0.2, 0.0, 0.0, 0.0]);
        let pb = feasible_step(&k, &p, 0.9);
        assert!((pb[0] + 0.09).abs() < 1e-15);
        assert_eq!(&pb.as_slice()[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn scaling_examples() {
        let k = v(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            scaling_matrix(&k, &v(&[1.0, -1.0, 0.0, -2.0])),
            v(&[0.1, 1.0, 0.3, 1.0])
        );
        assert_eq!(scaling_matrix(&k, &v(&[1.0; 4])), k);
        assert_eq!(scaling_matrix(&k, &v(&[-1.0; 4])), v(&[1.0; 4]));
    }

    #[test]
    fn cauchy_reduces_to_classical_step() {
        // g < 0: D = I. Curvature step shorter than the radius step.
        let k = v(&[1.0, 1.0]);
        let g = v(&[-1.0, -2.0]);
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let pc = cauchy_point(&k, &g, &j, 100.0, 0.995).unwrap();
        let lam = g.norm_squared() / (&j * &g).norm_squared();
        assert!((pc - (-&g * lam)).norm() < 1e-15);
    }

    #[test]
    fn cauchy_boundary_branch() {
        // g > 0 in the first component: D_11 = k_1 = 0.1, (Dg)_1 = 0.1 * 5.
        let k = v(&[0.1, 1.0]);
        let g = v(&[5.0, -0.1]);
        let j = DMatrix::from_row_slice(2, 2, &[0.01, 0.0, 0.0, 0.01]);
        let t = 0.9;
        let pc = cauchy_point(&k, &g, &j, 100.0, t).unwrap();
        let lam = t * 0.1 / (0.1 * 5.0);
        assert!((pc[0] + lam * 0.5).abs() < 1e-15);
        assert!((pc[1] + lam * -0.1).abs() < 1e-15);
        assert!(k[0] + pc[0] > 0.0);
    }

    #[test]
    fn cauchy_rejects_zero_gradient() {
        let k = v(&[1.0]);
        let j = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(
            cauchy_point(&k, &v(&[0.0]), &j, 1.0, 0.9),
            Err(Error::ZeroGradient)
        ));
    }

    #[test]
    fn mu_update_branches() {
        let cfg = TrConfig::default();
        let (mu, _) = radius_update(1.0, 0.5 * cfg.q, 1.0, 1.0, 1.0, &cfg);
        assert_eq!(mu, cfg.theta);
        let (mu, _) = radius_update(1.0, 1.2 * cfg.q, 1.0, 1.0, 1.0, &cfg);
        assert_eq!(mu, 1.0 / cfg.eta);
        let (mu, _) = radius_update(1.0, cfg.q, 1.0, 1.0, 1.0, &cfg);
        assert_eq!(mu, 1.0);
    }

    #[test]
    fn radius_is_clamped() {
        let cfg = TrConfig::default();
        assert_eq!(trust_radius(1.0, 1e6, 0.0, 1.0, &cfg), cfg.delta_max);
        assert_eq!(trust_radius(1e-3, 0.0, 0.0, 1.0, &cfg), cfg.delta_min);
        let d = trust_radius(1e-3, 1.0, 2.0, 4.0, &cfg);
        assert!((d - 1.2 * 0.5 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn discrepancy_examples() {
        assert!(discrepancy_stop(0.9, 0.5, 2.0));
        assert!(!discrepancy_stop(1.1, 0.5, 2.0));
        assert!(!discrepancy_stop(0.0, 0.0, 2.0));
    }
}
