use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tissue regions; label 0 is background.
pub const REGIONS: usize = 4;

/// Square grid of region labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelImage {
    side: usize,
    labels: Vec<u8>,
}

impl LabelImage {
    pub fn new(side: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != side * side {
            return Err(Error::Dimension(format!(
                "{} labels for a {side}x{side} grid",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize > REGIONS) {
            return Err(Error::Phantom(format!("label {bad} outside 0..={REGIONS}")));
        }
        Ok(LabelImage { side, labels })
    }

    pub fn background(side: usize) -> Self {
        LabelImage {
            side,
            labels: vec![0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.side + col]
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }
}

fn inside(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let u = (x - cx) / rx;
    let v = (y - cy) / ry;
    u * u + v * v <= 1.0
}

/// Procedural brain slice: a cortical band (1) with a folded inner edge around white matter
/// (2), two deep nuclei (3) and one midline structure (4). Coordinates are normalised to
/// `[-1, 1]`, so the layout scales with `side`.
pub fn make_phantom(side: usize) -> Result<LabelImage> {
    if side < 32 {
        return Err(Error::Phantom(format!(
            "side {side} too small; need at least 32 pixels"
        )));
    }
    let mut labels = vec![0u8; side * side];
    for row in 0..side {
        for col in 0..side {
            let x = 2.0 * (col as f64 + 0.5) / side as f64 - 1.0;
            let y = 2.0 * (row as f64 + 0.5) / side as f64 - 1.0;
            if !inside(x, y, 0.0, 0.0, 0.80, 0.92) {
                continue;
            }
            let phi = y.atan2(x);
            let fold = 1.0 + 0.04 * (9.0 * phi).sin();
            let label = if !inside(x, y, 0.0, 0.0, 0.50 * fold, 0.57 * fold) {
                1
            } else if inside(x, y, -0.25, -0.05, 0.13, 0.18) || inside(x, y, 0.25, -0.05, 0.13, 0.18) {
                3
            } else if inside(x, y, 0.0, 0.28, 0.17, 0.12) {
                4
            } else {
                2
            };
            labels[row * side + col] = label;
        }
    }
    let image = LabelImage { side, labels };
    for region in 1..=REGIONS as u8 {
        if image.count(region) == 0 {
            return Err(Error::Phantom(format!("region {region} is empty at side {side}")));
        }
    }
    Ok(image)
}

/// Writes labels as a binary (P5) PGM with values 0..=4.
pub fn write_pgm(labels: &LabelImage, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder =
        PnmEncoder::new(std::io::BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    let side = labels.side as u32;
    encoder.write_image(&labels.labels, side, side, ExtendedColorType::L8)?;
    Ok(())
}

/// Reads a square PGM label image; values must lie in 0..=4.
pub fn read_pgm(path: &Path) -> Result<LabelImage> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    if w != h {
        return Err(Error::Phantom(format!("label image must be square, got {w}x{h}")));
    }
    LabelImage::new(w as usize, img.into_raw())
}
