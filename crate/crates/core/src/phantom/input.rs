use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::InputFunction;
use crate::seed;

/// Shape of the arterial input: linear rise to `t_peak`, then a sum of three decaying
/// exponentials.
///
/// The defaults give a sharp early peak and slow washout over an hour; they are tunable
/// configuration, not measured population values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfShape {
    /// Time of the peak, minutes.
    pub t_peak: f64,
    /// Amplitudes as fractions of the peak value; must sum to 1.
    pub weights: [f64; 3],
    /// Decay rates, 1/min.
    pub rates: [f64; 3],
}

impl Default for IfShape {
    fn default() -> Self {
        IfShape {
            t_peak: 1.0,
            weights: [0.70, 0.20, 0.10],
            rates: [4.0, 0.25, 0.01],
        }
    }
}

/// Sample times for the input function: 3 s spacing over the first 5 minutes, 30 s after,
/// plus the peak time.
pub fn dense_input_times(t_end: f64, t_peak: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).filter(|&x| x <= t_end).collect();
    let mut x = 5.5;
    while x < t_end + 1e-9 {
        t.push(x);
        x += 0.5;
    }
    if t.last().is_some_and(|&last| last < t_end) {
        t.push(t_end);
    }
    if t_peak > 0.0 && t_peak < t_end {
        t.push(t_peak);
    }
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    t
}

/// Input function for an administered activity (MBq) in a distribution volume (L).
///
/// The peak concentration is `AA / V_d`, which in kBq/mL equals `1000 AA[MBq] / (1000 V_d[L])`.
pub fn input_function(aa_mbq: f64, vd_liters: f64, shape: &IfShape, times: &[f64]) -> Result<InputFunction> {
    if !(aa_mbq > 0.0 && vd_liters > 0.0) {
        return Err(Error::Config(
            "administered activity and distribution volume must be positive".into(),
        ));
    }
    if !(shape.t_peak > 0.0) || shape.rates.iter().any(|&r| !(r > 0.0)) || shape.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::Config(
            "input shape needs t_peak > 0, positive rates and non-negative weights".into(),
        ));
    }
    let total: f64 = shape.weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "input function is discontinuous at t_peak: weights sum to {total}, not 1"
        )));
    }
    let peak = aa_mbq * 1000.0 / (vd_liters * 1000.0);
    let values = times
        .iter()
        .map(|&t| {
            if t <= shape.t_peak {
                peak * t / shape.t_peak
            } else {
                let dt = t - shape.t_peak;
                shape
                    .weights
                    .iter()
                    .zip(&shape.rates)
                    .map(|(w, r)| peak * w * (-r * dt).exp())
                    .sum()
            }
        })
        .collect();
    InputFunction::new(times.to_vec(), values)
}

/// Multiplicative Gaussian perturbation `C_b(t_i)(1 + c r_i)`, `r_i ~ N(0, 1)` independent per
/// sample, clamped at zero.
pub fn perturb_if(input: &InputFunction, c: f64, seed: u64) -> Result<InputFunction> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("perturbation level {c} must be >= 0")));
    }
    if c == 0.0 {
        return Ok(input.clone());
    }
    let mut rng = seed::rng(seed);
    let values = input
        .values()
        .iter()
        .map(|&v| {
            let r: f64 = rng.sample(StandardNormal);
            (v * (1.0 + c * r)).max(0.0)
        })
        .collect();
    input.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> InputFunction {
        let shape = IfShape::default();
        input_function(350.0, 12.7, &shape, &dense_input_times(60.0, shape.t_peak)).unwrap()
    }

    #[test]
    fn peak_and_origin() {
        let f = standard();
        assert_eq!(f.eval(0.0), 0.0);
        assert!((f.eval(1.0) - 350_000.0 / 12_700.0).abs() < 1e-12);
        assert!((f.eval(1.0) - 27.56).abs() < 0.01);
    }

    #[test]
    fn decreasing_after_peak() {
        let f = standard();
        let after: Vec<f64> = f
            .times()
            .iter()
            .zip(f.values())
            .filter(|(t, _)| **t > 1.0)
            .map(|(_, v)| *v)
            .collect();
        assert!(after.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn discontinuous_shape_is_a_config_error() {
        let shape = IfShape {
            weights: [0.7, 0.2, 0.2],
            ..IfShape::default()
        };
        assert!(matches!(
            input_function(350.0, 12.7, &shape, &[0.0, 1.0, 2.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_perturbation_is_identity_and_seeded() {
        let f = standard();
        assert_eq!(perturb_if(&f, 0.0, 7).unwrap(), f);
        assert_eq!(perturb_if(&f, 0.1, 7).unwrap(), perturb_if(&f, 0.1, 7).unwrap());
        assert_ne!(perturb_if(&f, 0.1, 7).unwrap(), perturb_if(&f, 0.1, 8).unwrap());
    }

    #[test]
    fn perturbation_statistics() {
        // 10^4 independent draws at one time point: relative std ≈ c.
        let f = InputFunction::new(vec![0.0, 1.0], vec![0.0, 10.0]).unwrap();
        let samples: Vec<f64> = (0..10_000)
            .map(|s| perturb_if(&f, 0.10, s).unwrap().values()[1])
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let rel = var.sqrt() / mean;
        assert!((rel - 0.10).abs() < 0.01, "relative std {rel}");
    }
}
