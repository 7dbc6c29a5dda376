use crate::error::{Error, Result};

/// MAD-to-σ factor for Gaussian data.
const MAD_SCALE: f64 = 1.482_602_218_505_602;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn robust_sigma(mut e: Vec<f64>) -> f64 {
    let centre = median(&mut e);
    let mut dev: Vec<f64> = e.iter().map(|x| (x - centre).abs()).collect();
    MAD_SCALE * median(&mut dev)
}

fn check(tac: &[f64]) -> Result<bool> {
    if tac.len() < 4 {
        return Err(Error::Dimension(format!(
            "noise estimate needs at least 4 frames, got {}",
            tac.len()
        )));
    }
    if tac.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("time-activity curve"));
    }
    Ok(tac.iter().all(|&x| x == 0.0))
}

/// Residual-norm noise level `τ₁ = √N σ̂` of one time-activity curve with equally spaced
/// samples.
///
/// `σ̂` is the median absolute deviation of the second differences, scaled to a Gaussian σ;
/// for i.i.d. noise a second difference has variance `6σ²`. Smooth trends contribute little
/// to the median, so the estimate needs no replicate data. An all-zero curve gives 0.
pub fn noise_sigma(tac: &[f64]) -> Result<f64> {
    if check(tac)? {
        return Ok(0.0);
    }
    let d2: Vec<f64> = tac
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]) / 6f64.sqrt())
        .collect();
    Ok((tac.len() as f64).sqrt() * robust_sigma(d2))
}

/// As [`noise_sigma`], for samples at arbitrary increasing `times`.
///
/// Each interior sample is compared with the cubic through its two neighbours on either
/// side; the difference, divided by `√(1 + Σ w²)` for Lagrange weights `w`, has variance
/// `σ²` under i.i.d. noise and vanishes on cubics, so frame-length changes and smooth
/// curvature barely leak into the estimate. Curves shorter than 5 samples fall back to
/// second differences.
pub fn noise_sigma_at(tac: &[f64], times: &[f64]) -> Result<f64> {
    if check(tac)? {
        return Ok(0.0);
    }
    if times.len() != tac.len() {
        return Err(Error::Dimension(format!(
            "{} samples at {} times",
            tac.len(),
            times.len()
        )));
    }
    if tac.len() < 5 {
        return noise_sigma(tac);
    }
    let e: Vec<f64> = (2..tac.len() - 2)
        .map(|i| {
            let nb = [i - 2, i - 1, i + 1, i + 2];
            let mut pred = 0.0;
            let mut norm = 1.0;
            for &j in &nb {
                let w: f64 = nb
                    .iter()
                    .filter(|&&m| m != j)
                    .map(|&m| (times[i] - times[m]) / (times[j] - times[m]))
                    .product();
                pred += w * tac[j];
                norm += w * w;
            }
            (tac[i] - pred) / norm.sqrt()
        })
        .collect();
    Ok((tac.len() as f64).sqrt() * robust_sigma(e))
}
