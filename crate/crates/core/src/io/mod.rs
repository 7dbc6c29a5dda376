//! On-disk formats.
//!
//! A dataset directory holds `header.json` plus flat little-endian `f32` arrays:
//!
//! ```text
//! header.json      DatasetHeader
//! dynamic.f32      frames x side², frame-major
//! labels.f32       side², region index 0..=4
//! vmap.f32         side², blood volume fraction
//! input.f32        (time [min], value) pairs of the input function
//! sinograms.f32    frames x angles x detectors (noisy replicates only)
//! ```
//!
//! A map directory holds `header.json` (`MapsHeader`) plus `k.f64` (four maps,
//! parameter-major), `reasons.u8`, `iterations.u32` and `infilled.u8`. Maps keep full
//! precision so that evaluating ground-truth maps is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ParametricMaps;
use crate::kinetics::{InputFunction, KineticParams, TimeGrid};
use crate::phantom::{DynamicImage, GroundTruth, LabelImage, Provenance, Sinogram, REGIONS};

pub const FORMAT_VERSION: u32 = 1;

/// Angle list and detector count shared by every frame's sinogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinogramGeometry {
    /// Degrees.
    pub angles: Vec<f64>,
    pub detectors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub side: usize,
    pub frames: usize,
    /// Frame boundaries in seconds.
    pub frame_starts: Vec<f64>,
    pub frame_ends: Vec<f64>,
    pub input_samples: usize,
    /// Ground-truth parameters of regions 1..=4.
    pub regions: [KineticParams; REGIONS],
    /// Replicate index; absent for the noise-free reference.
    pub replicate: Option<usize>,
    pub provenance: Provenance,
    pub sinogram: Option<SinogramGeometry>,
}

/// Everything stored in one dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: TimeGrid,
    pub image: DynamicImage,
    pub input: InputFunction,
    pub regions: [KineticParams; REGIONS],
    pub replicate: Option<usize>,
    pub sinograms: Vec<Sinogram>,
}

impl Dataset {
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        GroundTruth::new(self.image.labels.clone(), self.regions)
    }

    fn header(&self) -> Result<DatasetHeader> {
        let sinogram = match self.sinograms.first() {
            None => None,
            Some(first) => {
                if self.sinograms.len() != self.image.frames
                    || self
                        .sinograms
                        .iter()
                        .any(|s| s.angles != first.angles || s.detectors != first.detectors)
                {
                    return Err(Error::Geometry(
                        "sinograms must share one geometry, one per frame".into(),
                    ));
                }
                Some(SinogramGeometry {
                    angles: first.angles.clone(),
                    detectors: first.detectors,
                })
            }
        };
        if self.grid.len() != self.image.frames {
            return Err(Error::Dimension(format!(
                "{} frames in the grid, {} in the image",
                self.grid.len(),
                self.image.frames
            )));
        }
        Ok(DatasetHeader {
            format_version: FORMAT_VERSION,
            side: self.image.side,
            frames: self.image.frames,
            frame_starts: self.grid.starts().to_vec(),
            frame_ends: self.grid.ends().to_vec(),
            input_samples: self.input.times().len(),
            regions: self.regions,
            replicate: self.replicate,
            provenance: self.image.provenance.clone(),
            sinogram,
        })
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Writes `values` rounded to `f32`, little-endian.
pub fn write_f32(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    write_bytes(path, &bytes)
}

/// Reads a little-endian `f32` array of exactly `len` entries.
pub fn read_f32(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = read_bytes(path)?;
    if bytes.len() != 4 * len {
        return Err(format_error(
            path,
            format!("expected {len} f32 values, found {} bytes", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| format_error(path, e.to_string()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    let header = data.header()?;
    ensure_dir(dir)?;
    write_json(&dir.join("header.json"), &header)?;
    write_f32(&dir.join("dynamic.f32"), &data.image.data)?;
    let labels: Vec<f64> = data.image.labels.as_slice().iter().map(|&l| l as f64).collect();
    write_f32(&dir.join("labels.f32"), &labels)?;
    write_f32(&dir.join("vmap.f32"), &data.image.vmap)?;
    let input: Vec<f64> = data
        .input
        .times()
        .iter()
        .zip(data.input.values())
        .flat_map(|(&t, &v)| [t, v])
        .collect();
    write_f32(&dir.join("input.f32"), &input)?;
    if !data.sinograms.is_empty() {
        let flat: Vec<f64> = data.sinograms.iter().flat_map(|s| s.data.iter().copied()).collect();
        write_f32(&dir.join("sinograms.f32"), &flat)?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let header_path = dir.join("header.json");
    let h: DatasetHeader = read_json(&header_path)?;
    if h.format_version != FORMAT_VERSION {
        return Err(format_error(
            &header_path,
            format!("unsupported format version {}", h.format_version),
        ));
    }
    let grid = TimeGrid::new(h.frame_starts.clone(), h.frame_ends.clone())?;
    if grid.len() != h.frames {
        return Err(format_error(
            &header_path,
            "frame count disagrees with frame boundaries",
        ));
    }
    let px = h.side * h.side;

    let labels_path = dir.join("labels.f32");
    let raw = read_f32(&labels_path, px)?;
    let mut labels = Vec::with_capacity(px);
    for v in raw {
        if v.fract() != 0.0 || !(0.0..=REGIONS as f64).contains(&v) {
            return Err(format_error(&labels_path, format!("invalid label value {v}")));
        }
        labels.push(v as u8);
    }
    let labels = LabelImage::new(h.side, labels)?;
    let data = read_f32(&dir.join("dynamic.f32"), h.frames * px)?;
    let vmap = read_f32(&dir.join("vmap.f32"), px)?;
    let image = DynamicImage::new(h.frames, data, labels, vmap, h.provenance.clone())?;

    let pairs = read_f32(&dir.join("input.f32"), 2 * h.input_samples)?;
    let (times, values): (Vec<f64>, Vec<f64>) = pairs.chunks_exact(2).map(|p| (p[0], p[1])).unzip();
    let input = InputFunction::new(times, values)?;

    let sinograms = match &h.sinogram {
        None => Vec::new(),
        Some(geo) => {
            let bins = geo.angles.len() * geo.detectors;
            let flat = read_f32(&dir.join("sinograms.f32"), h.frames * bins)?;
            flat.chunks_exact(bins.max(1))
                .map(|chunk| {
                    let mut s = Sinogram::zeros(geo.angles.clone(), h.side);
                    if s.detectors != geo.detectors {
                        return Err(format_error(&header_path, "detector count does not match image side"));
                    }
                    s.data.copy_from_slice(chunk);
                    Ok(s)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    Ok(Dataset {
        grid,
        image,
        input,
        regions: h.regions,
        replicate: h.replicate,
        sinograms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsHeader {
    pub format_version: u32,
    pub side: usize,
    /// Solver name, or "ground-truth".
    pub method: String,
    pub replicate: Option<usize>,
}

pub fn write_maps(dir: &Path, maps: &ParametricMaps, header: &MapsHeader) -> Result<()> {
    if header.side != maps.side {
        return Err(Error::Dimension(format!(
            "header side {} for {}-pixel maps",
            header.side, maps.side
        )));
    }
    ensure_dir(dir)?;
    write_json(&dir.join("header.json"), header)?;
    let k: Vec<u8> = maps.k.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
    write_bytes(&dir.join("k.f64"), &k)?;
    write_bytes(&dir.join("reasons.u8"), &maps.reasons)?;
    let it: Vec<u8> = maps.iterations.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_bytes(&dir.join("iterations.u32"), &it)?;
    let inf: Vec<u8> = maps.infilled.iter().map(|&b| u8::from(b)).collect();
    write_bytes(&dir.join("infilled.u8"), &inf)
}

pub fn read_maps(dir: &Path) -> Result<(ParametricMaps, MapsHeader)> {
    let header_path = dir.join("header.json");
    let h: MapsHeader = read_json(&header_path)?;
    if h.format_version != FORMAT_VERSION {
        return Err(format_error(
            &header_path,
            format!("unsupported format version {}", h.format_version),
        ));
    }
    let px = h.side * h.side;
    let sized = |name: &str, width: usize| -> Result<Vec<u8>> {
        let path = dir.join(name);
        let bytes = read_bytes(&path)?;
        if bytes.len() != width * px {
            return Err(format_error(
                &path,
                format!("expected {} bytes, found {}", width * px, bytes.len()),
            ));
        }
        Ok(bytes)
    };
    let k_bytes = sized("k.f64", 4 * 8)?;
    let values: Vec<f64> = k_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut maps = ParametricMaps::empty(h.side);
    for (j, chunk) in values.chunks_exact(px.max(1)).enumerate().take(4) {
        maps.k[j].copy_from_slice(chunk);
    }
    maps.reasons = sized("reasons.u8", 1)?;
    maps.iterations = sized("iterations.u32", 4)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    maps.infilled = sized("infilled.u8", 1)?.into_iter().map(|b| b != 0).collect();
    if maps.k.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(format_error(&dir.join("k.f64"), "maps must be finite and non-negative"));
    }
    Ok((maps, h))
}
