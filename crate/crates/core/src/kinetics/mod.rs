//! Two-compartment FDG kinetics.
//!
//! Tracer in blood (`C_b`) exchanges with a free tissue pool (`C_f`) and a metabolized pool
//! (`C_m`) through the rate constants `k1..k4`:
//!
//! ```text
//! d/dt [C_f, C_m] = M [C_f, C_m] + k1 C_b(t) e1,   M = [[-(k2+k3), k4], [k3, -k4]]
//! ```
//!
//! with zero initial state. The PET value of a pixel mixes tissue and blood:
//! `(1 - V)(C_f + C_m) + V C_b`.
//!
//! Times are stored in seconds on a [`TimeGrid`] and converted to minutes for evaluation,
//! since rate constants are expressed in 1/min.

mod convolution;
mod expm;
mod model;

pub use convolution::ConvolutionPlan;
pub use expm::{expm_2x2, system_matrix, Mat2};
pub use model::{measure, sensitivities, solve_forward, CompartmentCurve, ModelCurve, TacModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate constants (1/min) and blood volume fraction of one homogeneous tissue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub v: f64,
}

impl KineticParams {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, v: f64) -> Result<Self> {
        let p = KineticParams { k1, k2, k3, k4, v };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from a rate vector `[k1, k2, k3, k4]` and a blood fraction.
    pub fn from_rates(k: &[f64], v: f64) -> Result<Self> {
        if k.len() != 4 {
            return Err(Error::Dimension(format!("expected 4 rate constants, got {}", k.len())));
        }
        Self::new(k[0], k[1], k[2], k[3], v)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4)] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidParams(format!("{name} = {x} must be finite and >= 0")));
            }
        }
        if !self.v.is_finite() || !(0.0..1.0).contains(&self.v) {
            return Err(Error::InvalidParams(format!("V = {} must lie in [0, 1)", self.v)));
        }
        Ok(())
    }

    pub fn rates(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }
}

/// Frame layout of a dynamic acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Frame start times in seconds.
    starts: Vec<f64>,
    /// Frame end times in seconds.
    ends: Vec<f64>,
}

impl TimeGrid {
    pub fn new(starts: Vec<f64>, ends: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != ends.len() {
            return Err(Error::InvalidGrid(
                "start/end lists must be non-empty and of equal length".into(),
            ));
        }
        if starts[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first frame must start at t = 0, got {}",
                starts[0]
            )));
        }
        for i in 0..starts.len() {
            if !(starts[i].is_finite() && ends[i].is_finite()) || ends[i] <= starts[i] {
                return Err(Error::InvalidGrid(format!("frame {i} has non-positive duration")));
            }
            if i > 0 && starts[i] < ends[i - 1] {
                return Err(Error::InvalidGrid(format!("frame {i} overlaps the previous frame")));
            }
        }
        Ok(TimeGrid { starts, ends })
    }

    /// Contiguous frames starting at zero with the given durations in seconds.
    pub fn from_durations(durations: &[f64]) -> Result<Self> {
        let mut starts = Vec::with_capacity(durations.len());
        let mut ends = Vec::with_capacity(durations.len());
        let mut t = 0.0;
        for &d in durations {
            starts.push(t);
            t += d;
            ends.push(t);
        }
        Self::new(starts, ends)
    }

    /// The standard 60-minute FDG protocol: 6x10 s, 3x20 s, 3x30 s, 4x60 s, 3x150 s, 9x300 s.
    pub fn standard_fdg() -> Self {
        let mut d = Vec::with_capacity(28);
        for (count, len) in [(6, 10.0), (3, 20.0), (3, 30.0), (4, 60.0), (3, 150.0), (9, 300.0)] {
            d.extend(std::iter::repeat(len).take(count));
        }
        Self::from_durations(&d).expect("static grid is valid")
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    /// Frame midpoints in minutes.
    pub fn midpoints_min(&self) -> Vec<f64> {
        self.starts
            .iter()
            .zip(&self.ends)
            .map(|(s, e)| 0.5 * (s + e) / 60.0)
            .collect()
    }

    /// End of the last frame in minutes.
    pub fn end_min(&self) -> f64 {
        self.ends[self.ends.len() - 1] / 60.0
    }
}

/// Arterial tracer concentration (kBq/mL), piecewise linear between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFunction {
    /// Sample times in minutes, strictly increasing, starting at 0.
    times: Vec<f64>,
    values: Vec<f64>,
}

impl InputFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidInputFunction(
                "need at least two samples and equal-length time/value lists".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidInputFunction("first sample must be at t = 0".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidInputFunction("C_b(0) must be 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidInputFunction(
                "sample times must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInputFunction(
                "values must be finite and non-negative".into(),
            ));
        }
        Ok(InputFunction { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Linear interpolation; held constant past the last sample.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.times.len();
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Same sample times with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_layout() {
        let g = TimeGrid::standard_fdg();
        assert_eq!(g.len(), 28);
        assert_eq!(g.ends()[27], 3600.0);
        let mid = g.midpoints_min();
        assert!((mid[0] - 5.0 / 60.0).abs() < 1e-15);
        assert!((mid[27] - 57.5).abs() < 1e-12);
        assert!(mid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_must_start_at_zero() {
        assert!(TimeGrid::new(vec![1.0], vec![2.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 5.0], vec![10.0, 20.0]).is_err());
    }

    #[test]
    fn params_reject_negative_and_bad_volume() {
        assert!(KineticParams::new(0.1, -0.1, 0.0, 0.0, 0.0).is_err());
        assert!(KineticParams::new(0.1, 0.1, 0.0, 0.0, 1.0).is_err());
        assert!(KineticParams::new(0.1, 0.1, 0.0, 0.0, 0.99).is_ok());
    }

    #[test]
    fn input_function_interpolates_and_holds() {
        let f = InputFunction::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(2.0), 1.5);
        assert_eq!(f.eval(10.0), 1.0);
        assert!(InputFunction::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(InputFunction::new(vec![0.0, 1.0, 1.0], vec![0.0, 2.0, 1.0]).is_err());
    }
}
