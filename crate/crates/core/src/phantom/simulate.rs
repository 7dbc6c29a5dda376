use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::{LabelImage, REGIONS};
use super::noise::add_poisson;
use super::radon::{default_angles, fbp, radon, Filter, Sinogram};
use crate::error::{Error, Result};
use crate::kinetics::{InputFunction, KineticParams, TacModel, TimeGrid};
use crate::seed;

/// Reference kinetic parameters `(k1, k2, k3, k4, V)` of regions 1..=4.
pub const REFERENCE_PARAMS: [[f64; 5]; REGIONS] = [
    [0.10, 0.25, 0.10, 0.020, 0.05],
    [0.05, 0.15, 0.05, 0.020, 0.03],
    [0.07, 0.05, 0.10, 0.007, 0.04],
    [0.08, 0.10, 0.05, 0.007, 0.05],
];

/// Label image plus one parameter set per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: LabelImage,
    pub regions: [KineticParams; REGIONS],
}

impl GroundTruth {
    pub fn new(labels: LabelImage, regions: [KineticParams; REGIONS]) -> Result<Self> {
        for k in &regions {
            k.validate()?;
        }
        Ok(GroundTruth { labels, regions })
    }

    /// The reference parameter table on the given labels.
    pub fn reference(labels: LabelImage) -> Self {
        let regions = REFERENCE_PARAMS.map(|[k1, k2, k3, k4, v]| KineticParams { k1, k2, k3, k4, v });
        GroundTruth { labels, regions }
    }

    pub fn params(&self, label: u8) -> Option<&KineticParams> {
        (label as usize).checked_sub(1).and_then(|i| self.regions.get(i))
    }

    /// Per-pixel `k1..k4`; background is zero.
    pub fn rate_maps(&self) -> [Vec<f64>; 4] {
        std::array::from_fn(|j| {
            self.labels
                .as_slice()
                .iter()
                .map(|&l| self.params(l).map_or(0.0, |k| k.rates()[j]))
                .collect()
        })
    }

    /// Per-pixel blood fraction; background is zero.
    pub fn vmap(&self) -> Vec<f64> {
        self.labels
            .as_slice()
            .iter()
            .map(|&l| self.params(l).map_or(0.0, |k| k.v))
            .collect()
    }
}

/// How a dynamic image was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Seed of the noise stream; absent for noise-free data.
    pub seed: Option<u64>,
    pub noise: Option<NoiseSettings>,
    /// Input-function perturbation level used to generate the data.
    pub if_noise: f64,
}

/// Projection and count settings of the per-frame noise chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// Expected counts in the brightest sinogram bin over all frames.
    pub count_scale: f64,
    pub angles: usize,
    pub filter: Filter,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            count_scale: 1e4,
            angles: 90,
            filter: Filter::Hann,
        }
    }
}

/// Per-pixel curves on a square grid, stored frame-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicImage {
    pub side: usize,
    pub frames: usize,
    /// `data[f * side² + pixel]`.
    pub data: Vec<f64>,
    pub labels: LabelImage,
    pub vmap: Vec<f64>,
    pub provenance: Provenance,
}

impl DynamicImage {
    pub fn new(
        frames: usize,
        data: Vec<f64>,
        labels: LabelImage,
        vmap: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let side = labels.side();
        let px = side * side;
        if data.len() != frames * px || vmap.len() != px {
            return Err(Error::Dimension(format!(
                "{} samples and {} blood fractions for {frames} frames of {side}x{side}",
                data.len(),
                vmap.len()
            )));
        }
        Ok(DynamicImage {
            side,
            frames,
            data,
            labels,
            vmap,
            provenance,
        })
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        let px = self.pixels();
        &self.data[f * px..(f + 1) * px]
    }

    /// Time-activity curve of one pixel.
    pub fn tac(&self, pixel: usize) -> Vec<f64> {
        let px = self.pixels();
        (0..self.frames).map(|f| self.data[f * px + pixel]).collect()
    }
}

/// Noise-free dynamic image: one model curve per region, copied to its pixels.
pub fn simulate_dynamic(gt: &GroundTruth, input: &InputFunction, grid: &TimeGrid) -> Result<DynamicImage> {
    let frames = grid.len();
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(REGIONS);
    for k in &gt.regions {
        k.validate()?;
        curves.push(TacModel::new(input, grid, k.v)?.evaluate(&k.rates()));
    }
    let px = gt.labels.len();
    let mut data = vec![0.0; frames * px];
    for (p, &l) in gt.labels.as_slice().iter().enumerate() {
        if l == 0 {
            continue;
        }
        for (f, &c) in curves[l as usize - 1].iter().enumerate() {
            data[f * px + p] = c;
        }
    }
    DynamicImage::new(frames, data, gt.labels.clone(), gt.vmap(), Provenance::default())
}

/// Project every frame, add Poisson noise and reconstruct by filtered backprojection.
///
/// The count scale is relative to the brightest bin of all noise-free sinograms, so the
/// noise level does not depend on the activity units. Frame `f` draws from
/// `derive(seed, POISSON, f)`. Returns the reconstruction and the noisy sinograms.
pub fn reconstruct_frames(
    clean: &DynamicImage,
    noise: &NoiseSettings,
    seed: u64,
) -> Result<(DynamicImage, Vec<Sinogram>)> {
    if noise.angles == 0 {
        return Err(Error::Config("at least one projection angle is required".into()));
    }
    let angles = default_angles(noise.angles);
    let side = clean.side;
    let sinos = (0..clean.frames)
        .into_par_iter()
        .map(|f| radon(clean.frame(f), side, &angles))
        .collect::<Result<Vec<_>>>()?;
    let peak = sinos.iter().flat_map(|s| s.data.iter()).fold(0.0f64, |m, &x| m.max(x));

    let noisy: Vec<Sinogram> = if peak > 0.0 {
        let scale = noise.count_scale / peak;
        sinos
            .into_par_iter()
            .enumerate()
            .map(|(f, s)| add_poisson(&s, scale, seed::derive(seed, seed::POISSON, f as u64)))
            .collect::<Result<_>>()?
    } else {
        sinos
    };
    let images = noisy
        .par_iter()
        .map(|s| fbp(s, noise.filter))
        .collect::<Result<Vec<_>>>()?;
    let data = images.concat();
    let provenance = Provenance {
        seed: Some(seed),
        noise: Some(noise.clone()),
        if_noise: clean.provenance.if_noise,
    };
    let out = DynamicImage::new(clean.frames, data, clean.labels.clone(), clean.vmap.clone(), provenance)?;
    Ok((out, noisy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{dense_input_times, input_function, make_phantom, IfShape};

    fn input() -> InputFunction {
        let s = IfShape::default();
        input_function(350.0, 12.7, &s, &dense_input_times(60.0, s.t_peak)).unwrap()
    }

    #[test]
    fn reference_maps_carry_region_values() {
        let gt = GroundTruth::reference(make_phantom(32).unwrap());
        let maps = gt.rate_maps();
        for (p, &l) in gt.labels.as_slice().iter().enumerate() {
            for j in 0..4 {
                let want = if l == 0 {
                    0.0
                } else {
                    REFERENCE_PARAMS[l as usize - 1][j]
                };
                assert_eq!(maps[j][p], want);
            }
        }
    }

    #[test]
    fn background_only_is_zero() {
        let gt = GroundTruth::reference(LabelImage::background(8));
        let img = simulate_dynamic(&gt, &input(), &TimeGrid::standard_fdg()).unwrap();
        assert!(img.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn region_curves_match_single_voxel_model() {
        let gt = GroundTruth::reference(make_phantom(32).unwrap());
        let grid = TimeGrid::standard_fdg();
        let img = simulate_dynamic(&gt, &input(), &grid).unwrap();
        for label in 1..=REGIONS as u8 {
            let k = gt.params(label).unwrap();
            let want = TacModel::new(&input(), &grid, k.v).unwrap().evaluate(&k.rates());
            let pixels: Vec<usize> = (0..gt.labels.len())
                .filter(|&p| gt.labels.as_slice()[p] == label)
                .collect();
            for &p in &pixels {
                assert_eq!(img.tac(p), want);
            }
        }
    }

    #[test]
    fn noisy_reconstruction_is_deterministic() {
        let gt = GroundTruth::reference(make_phantom(32).unwrap());
        let grid = TimeGrid::from_durations(&[60.0, 300.0, 600.0]).unwrap();
        let clean = simulate_dynamic(&gt, &input(), &grid).unwrap();
        let settings = NoiseSettings {
            angles: 30,
            ..Default::default()
        };
        let a = reconstruct_frames(&clean, &settings, 11).unwrap();
        let b = reconstruct_frames(&clean, &settings, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reconstruction_error_shrinks_with_counts() {
        let gt = GroundTruth::reference(make_phantom(32).unwrap());
        let grid = TimeGrid::from_durations(&[600.0, 1200.0]).unwrap();
        let clean = simulate_dynamic(&gt, &input(), &grid).unwrap();
        let base = NoiseSettings {
            angles: 45,
            count_scale: 1e12,
            ..Default::default()
        };
        let reference = reconstruct_frames(&clean, &base, 1).unwrap().0;
        let err = |scale: f64| {
            let s = NoiseSettings {
                count_scale: scale,
                ..base.clone()
            };
            let rec = reconstruct_frames(&clean, &s, 5).unwrap().0;
            let num: f64 = rec.data.iter().zip(&reference.data).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = reference.data.iter().map(|b| b * b).sum();
            (num / den).sqrt()
        };
        let e: Vec<f64> = [1e2, 1e3, 1e4, 1e5].iter().map(|&s| err(s)).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    }
}
