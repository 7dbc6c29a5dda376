use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::convolution::ConvolutionPlan;
use super::expm::CONFLUENT_GAP;
use super::{InputFunction, KineticParams, TimeGrid};
use crate::error::{Error, Result};
use crate::optim::Model;

/// Relative eigenvalue gap below which sensitivities fall back to central differences of the
/// exact forward model; the analytic derivative of the eigen-form loses accuracy there.
const ANALYTIC_JACOBIAN_GAP: f64 = 1e-4;

/// Compartment concentrations at the frame midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentCurve {
    pub free: Vec<f64>,
    pub metabolized: Vec<f64>,
}

impl CompartmentCurve {
    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn total(&self) -> Vec<f64> {
        self.free.iter().zip(&self.metabolized).map(|(f, m)| f + m).collect()
    }
}

/// Pixel-level PET concentration per frame.
pub type ModelCurve = Vec<f64>;

/// Response of the system to the input with `k1 = 1`, plus derivatives in `k2..k4`.
struct UnitResponse {
    free: Vec<f64>,
    metab: Vec<f64>,
    /// `[j][i]`: derivative of `free + metab` at frame `i` w.r.t. `k_{j+2}`.
    d_total: Option<[Vec<f64>; 3]>,
}

fn unit_response(plan: &ConvolutionPlan, k2: f64, k3: f64, k4: f64, with_jacobian: bool) -> UnitResponse {
    let n = plan.len();
    let a = -0.5 * (k2 + k3 + k4);
    let d = 0.5 * (k4 - k2 - k3);
    let r = (d * d + k3 * k4).sqrt();

    if r <= CONFLUENT_GAP * a.abs() || r == 0.0 {
        // exp(Ms) = e^{as} (I + s (M - aI)), (M - aI) e1 = (d, k3)
        let mut i0 = vec![0.0; n];
        let mut i1 = vec![0.0; n];
        plan.convolve(a, &mut i0, Some(&mut i1));
        let free = i0.iter().zip(&i1).map(|(x, y)| x + d * y).collect();
        let metab = i1.iter().map(|y| k3 * y).collect();
        let d_total = with_jacobian.then(|| finite_difference_total(plan, k2, k3, k4));
        return UnitResponse { free, metab, d_total };
    }

    let l1 = a + r;
    let l2 = a - r;
    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let analytic = with_jacobian && r > ANALYTIC_JACOBIAN_GAP * a.abs();
    let mut p1 = if analytic { vec![0.0; n] } else { Vec::new() };
    let mut q1 = if analytic { vec![0.0; n] } else { Vec::new() };
    plan.convolve(l1, &mut p0, analytic.then_some(p1.as_mut_slice()));
    plan.convolve(l2, &mut q0, analytic.then_some(q1.as_mut_slice()));

    // u_f = S + d Q, u_m = k3 Q with S the kernel mean and Q the divided difference.
    let s: Vec<f64> = p0.iter().zip(&q0).map(|(x, y)| 0.5 * (x + y)).collect();
    let q: Vec<f64> = p0.iter().zip(&q0).map(|(x, y)| (x - y) / (2.0 * r)).collect();
    let free = s.iter().zip(&q).map(|(s, q)| s + d * q).collect();
    let metab = q.iter().map(|q| k3 * q).collect();

    let d_total = if analytic {
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (j, col) in out.iter_mut().enumerate() {
            let da = -0.5;
            let dd = if j == 2 { 0.5 } else { -0.5 };
            let dk3 = if j == 1 { 1.0 } else { 0.0 };
            let dr2 = 2.0 * d * dd
                + match j {
                    1 => k4,
                    2 => k3,
                    _ => 0.0,
                };
            let dr = dr2 / (2.0 * r);
            let dl1 = da + dr;
            let dl2 = da - dr;
            for i in 0..n {
                let ds = 0.5 * (p1[i] * dl1 + q1[i] * dl2);
                let dq = (p1[i] * dl1 - q1[i] * dl2) / (2.0 * r) - q[i] * dr / r;
                let dfree = ds + dd * q[i] + d * dq;
                let dmetab = dk3 * q[i] + k3 * dq;
                col[i] = dfree + dmetab;
            }
        }
        Some(out)
    } else if with_jacobian {
        Some(finite_difference_total(plan, k2, k3, k4))
    } else {
        None
    };
    UnitResponse { free, metab, d_total }
}

fn finite_difference_total(plan: &ConvolutionPlan, k2: f64, k3: f64, k4: f64) -> [Vec<f64>; 3] {
    let base = [k2, k3, k4];
    let total = |k: [f64; 3]| {
        let u = unit_response(plan, k[0], k[1], k[2], false);
        u.free.iter().zip(&u.metab).map(|(f, m)| f + m).collect::<Vec<_>>()
    };
    let column = |j: usize| {
        let h = 1e-6 * base[j].abs().max(1e-3);
        let shifted = |steps: f64| {
            let mut k = base;
            k[j] += steps * h;
            total(k)
        };
        if base[j] >= h {
            let (fp, fm) = (shifted(1.0), shifted(-1.0));
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        } else {
            // one-sided second order; rates must stay non-negative
            let (f0, f1, f2) = (shifted(0.0), shifted(1.0), shifted(2.0));
            (0..f0.len())
                .map(|i| (-3.0 * f0[i] + 4.0 * f1[i] - f2[i]) / (2.0 * h))
                .collect()
        }
    };
    [column(0), column(1), column(2)]
}

/// Compartment concentrations `C(t; k)` at the frame midpoints of `grid`.
pub fn solve_forward(k: &KineticParams, input: &InputFunction, grid: &TimeGrid) -> Result<CompartmentCurve> {
    k.validate()?;
    let plan = ConvolutionPlan::new(input, grid)?;
    let u = unit_response(&plan, k.k2, k.k3, k.k4, false);
    Ok(CompartmentCurve {
        free: u.free.iter().map(|x| k.k1 * x).collect(),
        metabolized: u.metab.iter().map(|x| k.k1 * x).collect(),
    })
}

/// PET concentration `(1 - V)(C_f + C_m) + V C_b` at the frame midpoints.
pub fn measure(c: &CompartmentCurve, k: &KineticParams, input: &InputFunction, grid: &TimeGrid) -> ModelCurve {
    grid.midpoints_min()
        .iter()
        .zip(c.free.iter().zip(&c.metabolized))
        .map(|(&t, (f, m))| (1.0 - k.v) * (f + m) + k.v * input.eval(t))
        .collect()
}

/// `N x 4` Jacobian of the model curve with respect to `k1..k4` (`V` held fixed).
pub fn sensitivities(k: &KineticParams, input: &InputFunction, grid: &TimeGrid) -> Result<DMatrix<f64>> {
    k.validate()?;
    let model = TacModel::new(input, grid, k.v)?;
    Ok(model.evaluate_with_jacobian(&k.rates()).1)
}

/// Forward model of one pixel with a fixed input function, frame grid and blood fraction.
///
/// The convolution plan is built once, so repeated evaluations during a fit only pay for
/// the two exponential-kernel recursions.
#[derive(Debug, Clone)]
pub struct TacModel {
    plan: ConvolutionPlan,
    v: f64,
}

impl TacModel {
    pub fn new(input: &InputFunction, grid: &TimeGrid, v: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidParams(format!("V = {v} must lie in [0, 1)")));
        }
        Ok(TacModel {
            plan: ConvolutionPlan::new(input, grid)?,
            v,
        })
    }

    /// Same input and grid with another blood fraction; reuses the convolution plan.
    pub fn with_blood_fraction(&self, v: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidParams(format!("V = {v} must lie in [0, 1)")));
        }
        Ok(TacModel {
            plan: self.plan.clone(),
            v,
        })
    }

    pub fn frames(&self) -> usize {
        self.plan.len()
    }

    pub fn blood_fraction(&self) -> f64 {
        self.v
    }

    pub fn evaluate(&self, k: &[f64; 4]) -> Vec<f64> {
        let u = unit_response(&self.plan, k[1], k[2], k[3], false);
        self.mix(k[0], &u)
    }

    pub fn evaluate_with_jacobian(&self, k: &[f64; 4]) -> (Vec<f64>, DMatrix<f64>) {
        let u = unit_response(&self.plan, k[1], k[2], k[3], true);
        let f = self.mix(k[0], &u);
        let n = self.plan.len();
        let w = 1.0 - self.v;
        let d = u.d_total.expect("requested");
        let jac = DMatrix::from_fn(n, 4, |i, j| match j {
            0 => w * (u.free[i] + u.metab[i]),
            _ => w * k[0] * d[j - 1][i],
        });
        (f, jac)
    }

    fn mix(&self, k1: f64, u: &UnitResponse) -> Vec<f64> {
        let w = 1.0 - self.v;
        u.free
            .iter()
            .zip(&u.metab)
            .zip(self.plan.input_at_outputs())
            .map(|((f, m), cb)| w * k1 * (f + m) + self.v * cb)
            .collect()
    }
}

fn as_rates(k: &DVector<f64>) -> [f64; 4] {
    [k[0], k[1], k[2], k[3]]
}

impl Model for TacModel {
    fn n_params(&self) -> usize {
        4
    }

    fn n_obs(&self) -> usize {
        self.plan.len()
    }

    fn values(&self, k: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.evaluate(&as_rates(k)))
    }

    fn values_and_jacobian(&self, k: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (f, j) = self.evaluate_with_jacobian(&as_rates(k));
        (DVector::from_vec(f), j)
    }
}
