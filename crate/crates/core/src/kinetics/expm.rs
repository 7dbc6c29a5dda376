use super::KineticParams;

pub type Mat2 = [[f64; 2]; 2];

/// Relative eigenvalue gap below which the confluent (Jordan) form is used.
pub(crate) const CONFLUENT_GAP: f64 = 1e-8;

/// Coefficient matrix of the compartment system.
pub fn system_matrix(k: &KineticParams) -> Mat2 {
    [[-(k.k2 + k.k3), k.k4], [k.k3, -k.k4]]
}

/// `exp(M dt)` for a real 2x2 matrix.
///
/// Writes `M = a I + N` with `a = tr(M)/2`, so that `N^2 = r^2 I` with
/// `r^2 = a^2 - det(M) = ((m00 - m11)/2)^2 + m01 m10`. Then `exp(M dt) = e^{a dt} (cosh(r dt) I + sinh(r dt)/r N)`, which
/// reduces to `e^{a dt} (I + dt N)` when the eigenvalues coincide. Compartment matrices
/// always have `r^2 >= 0`; the oscillatory case is handled for completeness.
pub fn expm_2x2(m: Mat2, dt: f64) -> Mat2 {
    let a = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    // a^2 - det(M), arranged to avoid cancellation
    let r2 = d * d + m[0][1] * m[1][0];
    let n = [[m[0][0] - a, m[0][1]], [m[1][0], m[1][1] - a]];

    let (c, s) = if r2.abs() <= (CONFLUENT_GAP * a).powi(2) || r2 == 0.0 {
        (1.0, dt)
    } else if r2 > 0.0 {
        let r = r2.sqrt();
        ((r * dt).cosh(), (r * dt).sinh() / r)
    } else {
        let w = (-r2).sqrt();
        ((w * dt).cos(), (w * dt).sin() / w)
    };

    let e = (a * dt).exp();
    [
        [e * (c + s * n[0][0]), e * s * n[0][1]],
        [e * s * n[1][0], e * (c + s * n[1][1])],
    ]
}
