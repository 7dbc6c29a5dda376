//! Exact convolution of a piecewise-linear input with exponential kernels.
//!
//! For a kernel `e^{λ s}` the running integrals
//!
//! ```text
//! I0(t) = ∫_0^t e^{λ(t-u)} C_b(u) du,     I1(t) = ∫_0^t (t-u) e^{λ(t-u)} C_b(u) du
//! ```
//!
//! are advanced node by node. Over a step of length `h` with `C_b` linear from `c0` to `c1`:
//!
//! ```text
//! I0 <- e^{λh} I0 + h [c1 φ0(λh) - (c1 - c0) φ1(λh)]
//! I1 <- e^{λh} (I1 + h I0) + h² [c1 φ1(λh) - (c1 - c0) φ2(λh)]
//! ```
//!
//! where `φk(z) = ∫_0^1 x^k e^{zx} dx`. `I1` is also `∂I0/∂λ`.

use super::{InputFunction, TimeGrid};
use crate::error::{Error, Result};

/// Precomputed node layout for evaluating convolutions at frame midpoints.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    /// Step lengths between consecutive nodes (minutes).
    steps: Vec<f64>,
    /// Input value at each node, starting with `C_b(0) = 0`.
    values: Vec<f64>,
    /// Node index of each output time.
    outputs: Vec<usize>,
    /// Input value at each output time.
    input_at_outputs: Vec<f64>,
}

impl ConvolutionPlan {
    pub fn new(input: &InputFunction, grid: &TimeGrid) -> Result<Self> {
        if grid.starts()[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must start at t = 0".into()));
        }
        let mids = grid.midpoints_min();
        Self::at_times(input, &mids)
    }

    /// Plan for arbitrary increasing output times (minutes, > 0).
    pub fn at_times(input: &InputFunction, times: &[f64]) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| !(t > 0.0)) {
            return Err(Error::InvalidGrid(
                "output times must be positive and increasing".into(),
            ));
        }
        let t_end = times.last().copied().unwrap_or(0.0);

        // Merge input breakpoints with output times.
        let mut nodes: Vec<f64> = input.times().iter().copied().take_while(|&t| t < t_end).collect();
        nodes.extend_from_slice(times);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();

        let values: Vec<f64> = nodes.iter().map(|&t| input.eval(t)).collect();
        let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        let outputs: Vec<usize> = times.iter().map(|t| nodes.partition_point(|n| n < t)).collect();
        let input_at_outputs = outputs.iter().map(|&i| values[i]).collect();
        Ok(ConvolutionPlan {
            steps,
            values,
            outputs,
            input_at_outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input_at_outputs(&self) -> &[f64] {
        &self.input_at_outputs
    }

    /// `I0` at the output times; if `i1` is given it receives `I1` as well.
    pub fn convolve(&self, lambda: f64, i0: &mut [f64], mut i1: Option<&mut [f64]>) {
        debug_assert_eq!(i0.len(), self.outputs.len());
        let mut a0 = 0.0;
        let mut a1 = 0.0;
        let mut next = 0;
        // node 0 is t = 0 only if an output is not at 0 (outputs are > 0)
        for (s, &h) in self.steps.iter().enumerate() {
            let c0 = self.values[s];
            let c1 = self.values[s + 1];
            let z = lambda * h;
            let e = z.exp();
            let (p0, p1, p2) = phi(z);
            let dc = c1 - c0;
            if i1.is_some() {
                a1 = e * (a1 + h * a0) + h * h * (c1 * p1 - dc * p2);
            }
            a0 = e * a0 + h * (c1 * p0 - dc * p1);
            while next < self.outputs.len() && self.outputs[next] == s + 1 {
                i0[next] = a0;
                if let Some(out) = i1.as_deref_mut() {
                    out[next] = a1;
                }
                next += 1;
            }
        }
    }
}

/// `(φ0, φ1, φ2)` at `z`, with `φk(z) = ∫_0^1 x^k e^{zx} dx`.
pub(crate) fn phi(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        // Σ z^n / (n! (n + k + 1))
        let mut term = 1.0;
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for n in 0..24 {
            let nf = n as f64;
            p0 += term / (nf + 1.0);
            p1 += term / (nf + 2.0);
            p2 += term / (nf + 3.0);
            term *= z / (nf + 1.0);
        }
        (p0, p1, p2)
    } else {
        let e = z.exp();
        let z2 = z * z;
        (
            z.exp_m1() / z,
            (e * (z - 1.0) + 1.0) / z2,
            (e * (z2 - 2.0 * z + 2.0) - 2.0) / (z2 * z),
        )
    }
}
