use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel-beam projections, stored angle-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    /// Projection angles in degrees.
    pub angles: Vec<f64>,
    /// Detector bins per angle.
    pub detectors: usize,
    /// Detector pitch in pixels.
    pub spacing: f64,
    /// Side of the image the projections came from.
    pub side: usize,
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(angles: Vec<f64>, side: usize) -> Self {
        let detectors = detector_count(side);
        Sinogram {
            data: vec![0.0; angles.len() * detectors],
            angles,
            detectors,
            spacing: 1.0,
            side,
        }
    }

    pub fn projection(&self, a: usize) -> &[f64] {
        &self.data[a * self.detectors..(a + 1) * self.detectors]
    }

    /// Signed offset of detector bin `j` from the rotation centre.
    pub fn offset(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * (self.detectors as f64 - 1.0)) * self.spacing
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.angles.len() * self.detectors || self.detectors == 0 || self.side == 0 {
            return Err(Error::Geometry(format!(
                "{} values for {} angles x {} detectors",
                self.data.len(),
                self.angles.len(),
                self.detectors
            )));
        }
        if self.detectors < detector_count(self.side) || !(self.spacing > 0.0) {
            return Err(Error::Geometry("detector row does not cover the image".into()));
        }
        Ok(())
    }
}

/// Odd number of unit-pitch bins covering the image diagonal.
fn detector_count(side: usize) -> usize {
    let n = (side as f64 * std::f64::consts::SQRT_2).ceil() as usize + 1;
    n | 1
}

/// `count` angles evenly spaced over `[0°, 180°)`.
pub fn default_angles(count: usize) -> Vec<f64> {
    (0..count).map(|i| 180.0 * i as f64 / count as f64).collect()
}

fn bilinear(image: &[f64], side: usize, x: f64, y: f64) -> f64 {
    if x <= -1.0 || y <= -1.0 || x >= side as f64 || y >= side as f64 {
        return 0.0;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (ix, iy) = (x0 as isize, y0 as isize);
    let px = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= side as isize || c >= side as isize {
            0.0
        } else {
            image[r as usize * side + c as usize]
        }
    };
    (1.0 - fy) * ((1.0 - fx) * px(iy, ix) + fx * px(iy, ix + 1))
        + fy * ((1.0 - fx) * px(iy + 1, ix) + fx * px(iy + 1, ix + 1))
}

/// Line integrals of a square image by bilinear sampling along each ray (half-pixel steps).
///
/// The rotation centre is the image centre; pixel `(row, col)` sits at `x = col`, `y = row`.
/// A ray at angle `θ` and offset `s` is `{ s (cos θ, sin θ) + τ (−sin θ, cos θ) }`.
pub fn radon(image: &[f64], side: usize, angles: &[f64]) -> Result<Sinogram> {
    if image.len() != side * side {
        return Err(Error::Dimension(format!(
            "image has {} pixels, expected {side}x{side}",
            image.len()
        )));
    }
    let mut sino = Sinogram::zeros(angles.to_vec(), side);
    let c = 0.5 * (side as f64 - 1.0);
    let step = 0.5;
    let half = 0.5 * sino.detectors as f64 * sino.spacing;
    let samples = (2.0 * half / step).ceil() as usize + 1;
    let tau0 = -0.5 * (samples as f64 - 1.0) * step;
    let detectors = sino.detectors;
    let offsets: Vec<f64> = (0..detectors).map(|j| sino.offset(j)).collect();

    for (a, &deg) in angles.iter().enumerate() {
        let (sin, cos) = deg.to_radians().sin_cos();
        for (j, &s) in offsets.iter().enumerate() {
            let mut sum = 0.0;
            for m in 0..samples {
                let tau = tau0 + m as f64 * step;
                let x = c + s * cos - tau * sin;
                let y = c + s * sin + tau * cos;
                sum += bilinear(image, side, x, y);
            }
            sino.data[a * detectors + j] = sum * step;
        }
    }
    Ok(sino)
}

/// Apodization of the ramp filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    /// Plain band-limited ramp.
    RamLak,
    /// Ramp multiplied by a Hann window reaching zero at Nyquist.
    #[default]
    Hann,
}

/// Filtered backprojection onto the original `side x side` grid.
///
/// Projections are convolved with the discrete band-limited ramp kernel (computed in the
/// spatial domain, then transformed) times the apodization window, and backprojected with
/// linear interpolation; the result is scaled by `π / angles`.
pub fn fbp(sino: &Sinogram, filter: Filter) -> Result<Vec<f64>> {
    sino.check()?;
    let nd = sino.detectors;
    let tau = sino.spacing;
    let padded = (2 * nd).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(padded);
    let inv = planner.plan_fft_inverse(padded);

    // spatial ramp kernel, wrapped
    let mut kernel = vec![Complex::new(0.0, 0.0); padded];
    kernel[0].re = 1.0 / (4.0 * tau * tau);
    for n in 1..padded / 2 {
        if n % 2 == 1 {
            let v = -1.0 / ((n * n) as f64 * PI * PI * tau * tau);
            kernel[n].re = v;
            kernel[padded - n].re = v;
        }
    }
    fwd.process(&mut kernel);
    let response: Vec<f64> = (0..padded)
        .map(|i| {
            let f = i.min(padded - i) as f64 / padded as f64; // cycles per sample, 0..0.5
            let window = match filter {
                Filter::RamLak => 1.0,
                Filter::Hann => 0.5 * (1.0 + (2.0 * PI * f).cos()),
            };
            kernel[i].re * window
        })
        .collect();

    let mut filtered = vec![0.0; sino.data.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); padded];
    for a in 0..sino.angles.len() {
        buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for (z, &p) in buf.iter_mut().zip(sino.projection(a)) {
            z.re = p;
        }
        fwd.process(&mut buf);
        for (z, h) in buf.iter_mut().zip(&response) {
            *z *= *h;
        }
        inv.process(&mut buf);
        let scale = tau / padded as f64;
        for (j, out) in filtered[a * nd..(a + 1) * nd].iter_mut().enumerate() {
            *out = buf[j].re * scale;
        }
    }

    let side = sino.side;
    let c = 0.5 * (side as f64 - 1.0);
    let centre = 0.5 * (nd as f64 - 1.0);
    let trig: Vec<(f64, f64)> = sino.angles.iter().map(|d| d.to_radians().sin_cos()).collect();
    let mut image = vec![0.0; side * side];
    for row in 0..side {
        let y = row as f64 - c;
        for col in 0..side {
            let x = col as f64 - c;
            let mut sum = 0.0;
            for (a, &(sin, cos)) in trig.iter().enumerate() {
                let u = (x * cos + y * sin) / tau + centre;
                let i0 = u.floor();
                let w = u - i0;
                let i0 = i0 as isize;
                if i0 < 0 || i0 as usize + 1 >= nd {
                    continue;
                }
                let q = &filtered[a * nd..(a + 1) * nd];
                sum += (1.0 - w) * q[i0 as usize] + w * q[i0 as usize + 1];
            }
            image[row * side + col] = sum * PI / sino.angles.len() as f64;
        }
    }
    Ok(image)
}
