use serde::{Deserialize, Serialize};

use super::fit::ParametricMaps;
use crate::error::{Error, Result};
use crate::phantom::{LabelImage, REGIONS};

pub const PARAMETER_NAMES: [&str; 4] = ["k1", "k2", "k3", "k4"];

/// Mean and spread of one parameter over one region, pooled over replicate maps.
///
/// `mean` and `std` are `None` when the region has no usable pixels (or, for `std`, only one
/// value per replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region: u8,
    pub parameter: usize,
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Per-region statistics of each rate constant, rows ordered by region then parameter.
///
/// Values from all replicates are pooled: `mean` is the grand mean and
/// `std² = (Σ_r Σ_i (x_ri − m)²) / (N − R)` with `N` values in `R` non-empty replicates. For
/// one replicate this is the sample standard deviation; identical replicates give the
/// single-map value; replicate-to-replicate shifts increase it. Infilled pixels are skipped
/// unless `include_infilled` is set.
pub fn region_stats(maps: &[ParametricMaps], labels: &LabelImage, include_infilled: bool) -> Result<Vec<RegionStats>> {
    for m in maps {
        if m.side != labels.side() {
            return Err(Error::Dimension(format!(
                "{}x{0} maps with {}x{1} labels",
                m.side,
                labels.side()
            )));
        }
    }
    let mut rows = Vec::with_capacity(REGIONS * 4);
    for region in 1..=REGIONS as u8 {
        let pixels: Vec<usize> = (0..labels.len()).filter(|&p| labels.as_slice()[p] == region).collect();
        for parameter in 0..4 {
            let groups: Vec<Vec<f64>> = maps
                .iter()
                .map(|m| {
                    pixels
                        .iter()
                        .filter(|&&p| include_infilled || !m.infilled[p])
                        .map(|&p| m.k[parameter][p])
                        .collect::<Vec<f64>>()
                })
                .filter(|g| !g.is_empty())
                .collect();
            let n: usize = groups.iter().map(Vec::len).sum();
            let (mean, std) = if n == 0 {
                (None, None)
            } else {
                // shifted by a sample value, so constant regions are reproduced exactly
                let c = groups[0][0];
                let m = c + groups.iter().flatten().map(|x| x - c).sum::<f64>() / n as f64;
                let dof = n - groups.len();
                let ss: f64 = groups.iter().flatten().map(|x| (x - m).powi(2)).sum();
                (Some(m), (dof > 0).then(|| (ss / dof as f64).sqrt()))
            };
            rows.push(RegionStats {
                region,
                parameter,
                n,
                mean,
                std,
            });
        }
    }
    Ok(rows)
}
