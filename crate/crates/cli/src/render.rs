use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::GrayImage;
use petkin::imaging::{ParametricMaps, PARAMETER_NAMES};
use petkin::phantom::{DynamicImage, GroundTruth};
use serde::Serialize;

use crate::{io_err, CliError};

/// Grey-level range recorded for each rendered image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

/// Maps `[min, max]` linearly onto 0..=255, clamping outside values.
pub fn to_gray(values: &[f64], side: usize, scale: Scale) -> GrayImage {
    let span = scale.max - scale.min;
    let pixels = values
        .iter()
        .map(|&v| {
            let t = if span > 0.0 { (v - scale.min) / span } else { 0.0 };
            (255.0 * t.clamp(0.0, 1.0)).round() as u8
        })
        .collect();
    GrayImage::from_raw(side as u32, side as u32, pixels).expect("buffer matches dimensions")
}

/// Pixel-wise mean over replicate maps.
pub fn mean_maps(maps: &[ParametricMaps]) -> Option<[Vec<f64>; 4]> {
    let first = maps.first()?;
    let n = first.pixels();
    Some(std::array::from_fn(|j| {
        (0..n)
            .map(|p| maps.iter().map(|m| m.k[j][p]).sum::<f64>() / maps.len() as f64)
            .collect()
    }))
}

fn save(img: &GrayImage, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    img.save(path).map_err(|e| io_err(path, e))
}

pub fn render_all(
    dir: &Path,
    gt: &GroundTruth,
    fits: &[(String, Vec<ParametricMaps>)],
    frames: &[(String, DynamicImage)],
    k_max: &[f64; 4],
) -> Result<(), CliError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let side = gt.labels.side();
    let mut scales = BTreeMap::new();
    let mut groups: Vec<(String, [Vec<f64>; 4])> = vec![("ground-truth".into(), gt.rate_maps())];
    for (method, maps) in fits {
        if let Some(mean) = mean_maps(maps) {
            groups.push((method.clone(), mean));
        }
    }
    for (name, maps) in &groups {
        for (j, values) in maps.iter().enumerate() {
            let scale = Scale {
                min: 0.0,
                max: k_max[j],
            };
            let rel = format!("{name}/{}.png", PARAMETER_NAMES[j]);
            save(&to_gray(values, side, scale), &dir.join(&rel))?;
            scales.insert(rel, scale);
        }
    }
    for (name, image) in frames {
        let last = image.frame(image.frames - 1);
        let scale = Scale {
            min: 0.0,
            max: last.iter().fold(0.0f64, |m, &v| m.max(v)),
        };
        let rel = format!("frames/{name}-last.png");
        save(&to_gray(last, image.side, scale), &dir.join(&rel))?;
        scales.insert(rel, scale);
    }
    let path = dir.join("scale.json");
    let mut text = serde_json::to_string_pretty(&scales).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}
