#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use petkin::kinetics::{InputFunction, KineticParams, TimeGrid};
use petkin::optim::Model;
use petkin::phantom::{dense_input_times, input_function, IfShape, REFERENCE_PARAMS};

pub fn standard_input() -> InputFunction {
    let s = IfShape::default();
    input_function(350.0, 12.7, &s, &dense_input_times(60.0, s.t_peak)).unwrap()
}

pub fn region(r: usize) -> KineticParams {
    let [k1, k2, k3, k4, v] = REFERENCE_PARAMS[r - 1];
    KineticParams::new(k1, k2, k3, k4, v).unwrap()
}

/// RK4 on `C' = M C + k1 C_b(t) e1`, `C(0) = 0`, stepping through every IF node and output
/// time so the right-hand side is smooth within each step. Returns `(C_f, C_m)` at `times`.
pub fn rk4_compartments(k: &KineticParams, input: &InputFunction, times: &[f64], h: f64) -> Vec<(f64, f64)> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let mut nodes: Vec<f64> = (0..=((t_end / h).ceil() as usize)).map(|i| i as f64 * h).collect();
    nodes.extend(input.times().iter().copied().filter(|&t| t <= t_end));
    nodes.extend_from_slice(times);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let rhs = |t: f64, c: [f64; 2]| -> [f64; 2] {
        [
            -(k.k2 + k.k3) * c[0] + k.k4 * c[1] + k.k1 * input.eval(t),
            k.k3 * c[0] - k.k4 * c[1],
        ]
    };
    let mut c = [0.0, 0.0];
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut sorted: Vec<(usize, f64)> = times.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut values = vec![(0.0, 0.0); times.len()];
    for w in nodes.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        while next < sorted.len() && (sorted[next].1 - t0).abs() < 1e-12 {
            values[sorted[next].0] = (c[0], c[1]);
            next += 1;
        }
        let dt = t1 - t0;
        // the input is linear on [t0, t1]; evaluate it inside the step
        let mid = t0 + 0.5 * dt;
        let k1 = rhs(t0 + 1e-15 * dt, c);
        let k2 = rhs(mid, [c[0] + 0.5 * dt * k1[0], c[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs(mid, [c[0] + 0.5 * dt * k2[0], c[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs(t1 - 1e-15 * dt, [c[0] + dt * k3[0], c[1] + dt * k3[1]]);
        for i in 0..2 {
            c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    while next < sorted.len() {
        values[sorted[next].0] = (c[0], c[1]);
        next += 1;
    }
    out.extend(values);
    out
}

/// RK4 model curve at the frame midpoints.
pub fn rk4_measured(k: &KineticParams, input: &InputFunction, grid: &TimeGrid) -> Vec<f64> {
    let mid = grid.midpoints_min();
    rk4_compartments(k, input, &mid, 0.01)
        .iter()
        .zip(&mid)
        .map(|(&(f, m), &t)| (1.0 - k.v) * (f + m) + k.v * input.eval(t))
        .collect()
}

/// `F(k) = k`.
pub struct Identity(pub usize);

impl Model for Identity {
    fn n_params(&self) -> usize {
        self.0
    }
    fn n_obs(&self) -> usize {
        self.0
    }
    fn values(&self, k: &DVector<f64>) -> DVector<f64> {
        k.clone()
    }
    fn values_and_jacobian(&self, k: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (k.clone(), DMatrix::identity(self.0, self.0))
    }
}

/// `F(k) = A k` with a fixed matrix.
pub struct Linear(pub DMatrix<f64>);

impl Model for Linear {
    fn n_params(&self) -> usize {
        self.0.ncols()
    }
    fn n_obs(&self) -> usize {
        self.0.nrows()
    }
    fn values(&self, k: &DVector<f64>) -> DVector<f64> {
        &self.0 * k
    }
    fn values_and_jacobian(&self, k: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (&self.0 * k, self.0.clone())
    }
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1e-300))
        .fold(0.0, f64::max)
}
