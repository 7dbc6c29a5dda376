use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Result of the trust-region secular equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularSolution {
    pub alpha: f64,
    /// `p(α) = (JᵀJ + αI)⁻¹ Jᵀ r`.
    pub step: DVector<f64>,
    /// `false` when the Gauss-Newton step already lies inside the region.
    pub active: bool,
}

const REL_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;

struct Shifted<'a> {
    b: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
}

impl Shifted<'_> {
    /// `p(α)` and `‖L⁻¹ p‖²` from a Cholesky factorisation of `B + αI`.
    fn solve(&self, alpha: f64) -> Option<(DVector<f64>, f64)> {
        let n = self.b.nrows();
        let shifted = self.b + DMatrix::<f64>::identity(n, n) * alpha;
        let chol: Cholesky<f64, Dyn> = Cholesky::new(shifted)?;
        let p = chol.solve(self.rhs);
        if p.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let q = chol.l().solve_lower_triangular(&p)?;
        Some((p, q.norm_squared()))
    }

    /// Solves at `alpha`, raising it until the factorisation succeeds.
    fn solve_raising(&self, mut alpha: f64) -> Result<(f64, DVector<f64>, f64)> {
        let floor = 1e-14 * (1.0 + self.b.diagonal().amax());
        for _ in 0..64 {
            if let Some((p, qq)) = self.solve(alpha) {
                return Ok((alpha, p, qq));
            }
            alpha = (alpha * 10.0).max(floor);
        }
        Err(Error::NonFinite("shifted normal equations"))
    }
}

/// Finds `α > 0` with `‖p(α)‖ = Δ`, `p(α) = (JᵀJ + αI)⁻¹ Jᵀ r`.
///
/// Newton's method is applied to `φ(α) = 1/Δ − 1/‖p(α)‖`, which is increasing and concave,
/// inside a bracket `[α_lo, ‖Jᵀr‖/Δ]`; bisection takes over when a Newton step leaves it.
/// If `‖p(α_floor)‖ ≤ Δ` the constraint cannot be active and `(α_floor, p(α_floor))` is
/// returned with `active = false`.
pub fn solve_secular(j: &DMatrix<f64>, r: &DVector<f64>, delta: f64, alpha_floor: f64) -> Result<SecularSolution> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Config(format!("trust radius Δ = {delta} must be positive")));
    }
    if !(alpha_floor.is_finite() && alpha_floor > 0.0) {
        return Err(Error::Config(format!("α floor = {alpha_floor} must be positive")));
    }
    if j.iter().chain(r.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("secular equation inputs"));
    }
    if j.nrows() != r.len() {
        return Err(Error::Dimension("Jacobian rows and residual length differ".into()));
    }

    let b = j.tr_mul(j);
    let rhs = j.tr_mul(r);
    let sys = Shifted { b: &b, rhs: &rhs };

    let (alpha0, p0, _) = sys.solve_raising(alpha_floor)?;
    if p0.norm() <= delta {
        return Ok(SecularSolution {
            alpha: alpha0,
            step: p0,
            active: false,
        });
    }

    let mut lo = alpha0;
    let mut hi = rhs.norm() / delta;
    let mut alpha = alpha0;
    let mut best: Option<(f64, DVector<f64>)> = None;

    for _ in 0..MAX_NEWTON {
        let (a, p, qq) = sys.solve_raising(alpha)?;
        alpha = a;
        let pn = p.norm();
        let gap = pn - delta;
        if gap.abs() <= REL_TOL * delta {
            return Ok(SecularSolution {
                alpha,
                step: p,
                active: true,
            });
        }
        if gap > 0.0 {
            lo = lo.max(alpha);
        } else {
            hi = hi.min(alpha);
        }
        best = Some((alpha, p));

        let newton = alpha + (pn * pn / qq) * gap / delta;
        alpha = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    // bracket collapsed: the closest iterate is as good as floating point allows
    let (alpha, step) = best.expect("at least one iteration");
    Ok(SecularSolution {
        alpha,
        step,
        active: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_jacobian_has_closed_form() {
        let j = DMatrix::<f64>::identity(4, 4);
        let r = DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        let s = solve_secular(&j, &r, 1.0, 1e-10).unwrap();
        assert!(s.active);
        assert!((s.alpha - 1.0).abs() < 1e-10);
        assert!((&s.step - &r / 2.0).norm() < 1e-10);

        let r = DVector::from_vec(vec![0.3, 0.4, 0.0, 0.0]);
        let s = solve_secular(&j, &r, 1.0, 1e-10).unwrap();
        assert!(!s.active);
        assert_eq!(s.alpha, 1e-10);
    }

    #[test]
    fn rank_deficient_jacobian_is_handled() {
        let mut j = DMatrix::<f64>::zeros(5, 4);
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 2.0;
        let r = DVector::from_vec(vec![3.0, 1.0, 0.5, 0.0, 0.0]);
        let s = solve_secular(&j, &r, 0.5, 1e-10).unwrap();
        assert!(s.active);
        assert!((s.step.norm() - 0.5).abs() < 1e-8 * 0.5);
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let j = DMatrix::<f64>::identity(2, 2);
        let r = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(solve_secular(&j, &r, 1.0, 1e-10).is_err());
        assert!(solve_secular(&j, &DVector::from_vec(vec![1.0, 1.0]), 0.0, 1e-10).is_err());
    }
}
