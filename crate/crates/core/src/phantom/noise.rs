use rand_distr::{Distribution, Poisson};

use super::radon::Sinogram;
use crate::error::{Error, Result};
use crate::seed;

/// Replace every bin `v` by `Poisson(scale·v) / scale`.
///
/// Negative bins are clamped to zero first and reported through `log`.
pub fn add_poisson(sino: &Sinogram, scale: f64, seed: u64) -> Result<Sinogram> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("count scale must be positive, got {scale}")));
    }
    let mut rng = seed::rng(seed);
    let mut out = sino.clone();
    let mut clamped = 0usize;
    for v in out.data.iter_mut() {
        if !v.is_finite() {
            return Err(Error::NonFinite("sinogram"));
        }
        if *v < 0.0 {
            clamped += 1;
            *v = 0.0;
        }
        let mean = scale * *v;
        *v = if mean > 0.0 {
            let draw: f64 = Poisson::new(mean)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(&mut rng);
            draw / scale
        } else {
            0.0
        };
    }
    if clamped > 0 {
        log::warn!("{clamped} negative sinogram bins clamped to zero before sampling");
    }
    Ok(out)
}
