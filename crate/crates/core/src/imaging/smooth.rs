use crate::error::{Error, Result};
use crate::phantom::DynamicImage;

/// Normalised `window x window` Gaussian, row-major.
pub fn gaussian_kernel(sigma: f64, window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::Config(format!("smoothing window {window} must be odd")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("smoothing sigma {sigma} must be positive")));
    }
    let h = (window / 2) as f64;
    let mut k: Vec<f64> = (0..window * window)
        .map(|i| {
            let (y, x) = ((i / window) as f64 - h, (i % window) as f64 - h);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Mirror index into `0..n` with the edge sample repeated (`c b a | a b c`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Per-frame convolution with a normalised Gaussian, reflect-padded borders.
pub fn deblur_gaussian(img: &DynamicImage, sigma: f64, window: usize) -> Result<DynamicImage> {
    let kernel = gaussian_kernel(sigma, window)?;
    let side = img.side;
    let h = (window / 2) as isize;
    let mut out = img.clone();
    for f in 0..img.frames {
        let src = img.frame(f);
        let dst = &mut out.data[f * side * side..(f + 1) * side * side];
        for r in 0..side {
            for c in 0..side {
                let mut acc = 0.0;
                for dy in -h..=h {
                    let rr = reflect(r as isize + dy, side);
                    for dx in -h..=h {
                        let cc = reflect(c as isize + dx, side);
                        acc += kernel[((dy + h) as usize) * window + (dx + h) as usize] * src[rr * side + cc];
                    }
                }
                dst[r * side + c] = acc;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{LabelImage, Provenance};

    fn image(side: usize, data: Vec<f64>) -> DynamicImage {
        DynamicImage::new(
            1,
            data,
            LabelImage::background(side),
            vec![0.0; side * side],
            Provenance::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_is_preserved() {
        let img = image(7, vec![3.25; 49]);
        let out = deblur_gaussian(&img, 1.0, 3).unwrap();
        assert!(out.data.iter().all(|&v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn impulse_returns_the_kernel() {
        let mut data = vec![0.0; 49];
        data[3 * 7 + 3] = 1.0;
        let out = deblur_gaussian(&image(7, data), 1.0, 3).unwrap();
        let k = gaussian_kernel(1.0, 3).unwrap();
        for dy in 0..3 {
            for dx in 0..3 {
                assert!((out.data[(2 + dy) * 7 + 2 + dx] - k[dy * 3 + dx]).abs() < 1e-15);
            }
        }
        assert!((out.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_sigma_kernel_weights() {
        let k = gaussian_kernel(1.0, 3).unwrap();
        let e1 = (-0.5f64).exp();
        let e2 = (-1.0f64).exp();
        let z = 1.0 + 4.0 * e1 + 4.0 * e2;
        assert!((k[4] - 1.0 / z).abs() < 1e-15);
        assert!((k[1] - e1 / z).abs() < 1e-15);
        assert!((k[0] - e2 / z).abs() < 1e-15);
    }

    #[test]
    fn even_window_is_rejected() {
        assert!(gaussian_kernel(1.0, 4).is_err());
    }

    #[test]
    fn reflect_repeats_edge() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
    }
}
