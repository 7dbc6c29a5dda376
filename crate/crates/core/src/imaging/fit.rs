use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::noise_sigma_at;
use crate::error::{Error, Result};
use crate::kinetics::{InputFunction, TacModel, TimeGrid};
use crate::optim::{projected_lm, reg_as_tr, FitSummary, LmConfig, ResidualProblem, StopReason, TrConfig};
use crate::phantom::{DynamicImage, GroundTruth};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    RegAsTr,
    ProjectedLm,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::RegAsTr => "reg-as-tr",
            SolverKind::ProjectedLm => "projected-lm",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reg-as-tr" => Ok(SolverKind::RegAsTr),
            "projected-lm" => Ok(SolverKind::ProjectedLm),
            _ => Err(Error::Config(format!("unknown solver `{s}`"))),
        }
    }
}

/// Order in which pixels are visited.
///
/// `Wavefront` fits all pixels with equal `2·row + col` concurrently. Every causal
/// neighbour of a pixel (the row above and the pixel to its left) lies on an earlier front
/// and no two pixels of one front are neighbours, so the result equals the raster scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    Raster,
    #[default]
    Wavefront,
}

/// How boundary pixels and usable neighbours are identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Labels are not consulted: a pixel is on a boundary when it touches the background
    /// or its fitted neighbours disagree (coefficient of variation above the threshold).
    #[default]
    Production,
    /// Test hook: boundaries and neighbour sets come from the true labels.
    OracleLabels,
}

/// Initialisation and stopping policy of the per-pixel fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PixelFitPolicy {
    /// Box for random initial guesses, per rate constant (1/min). The default spans broad
    /// physiological ranges for brain FDG kinetics.
    pub prior_low: [f64; 4],
    pub prior_high: [f64; 4],
    pub neighbor_init: bool,
    /// Fitted causal neighbours needed for a neighbour-mean start.
    pub min_neighbors: usize,
    /// `τ₂ / τ₁` on boundary pixels.
    pub boundary_multiplier: f64,
    /// `τ₂ / τ₁` on interior pixels.
    pub interior_multiplier: f64,
    /// Relative residual change below which a fit under `τ₂` counts as a plateau.
    pub plateau_tol: f64,
    /// Neighbour coefficient of variation that marks a boundary.
    pub cv_threshold: f64,
    pub scan: ScanOrder,
    pub mode: InitMode,
}

impl Default for PixelFitPolicy {
    fn default() -> Self {
        PixelFitPolicy {
            prior_low: [0.01, 0.01, 0.01, 0.001],
            prior_high: [0.3, 0.5, 0.3, 0.05],
            neighbor_init: true,
            min_neighbors: 2,
            boundary_multiplier: 10.0,
            interior_multiplier: 3.0,
            plateau_tol: 1e-2,
            cv_threshold: 0.5,
            scan: ScanOrder::Wavefront,
            mode: InitMode::Production,
        }
    }
}

impl PixelFitPolicy {
    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            let (lo, hi) = (self.prior_low[i], self.prior_high[i]);
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "prior box for k{} must satisfy 0 < low < high",
                    i + 1
                )));
            }
        }
        if !(self.boundary_multiplier >= 1.0 && self.interior_multiplier >= 1.0) {
            return Err(Error::Config("threshold multipliers must be >= 1".into()));
        }
        if !(self.plateau_tol > 0.0 && self.cv_threshold > 0.0) {
            return Err(Error::Config(
                "plateau tolerance and CV threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a pixel fit needs besides the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub solver: SolverKind,
    pub tr: TrConfig,
    pub lm: LmConfig,
    pub policy: PixelFitPolicy,
    /// Root of the initial-guess streams.
    pub seed: u64,
}

/// Rate-constant maps plus per-pixel diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricMaps {
    pub side: usize,
    pub k: [Vec<f64>; 4],
    /// `StopReason::code`, 0 for pixels that were not fitted.
    pub reasons: Vec<u8>,
    pub iterations: Vec<u32>,
    /// Stalled pixels whose values were replaced by the region median.
    pub infilled: Vec<bool>,
}

impl ParametricMaps {
    pub fn empty(side: usize) -> Self {
        let n = side * side;
        ParametricMaps {
            side,
            k: std::array::from_fn(|_| vec![0.0; n]),
            reasons: vec![0; n],
            iterations: vec![0; n],
            infilled: vec![false; n],
        }
    }

    /// Exact maps of a ground truth, with no fit diagnostics.
    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        let mut m = ParametricMaps::empty(gt.labels.side());
        m.k = gt.rate_maps();
        m
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn rates(&self, p: usize) -> [f64; 4] {
        std::array::from_fn(|j| self.k[j][p])
    }

    pub fn fitted(&self) -> usize {
        self.reasons.iter().filter(|&&r| r != 0).count()
    }

    pub fn stalled(&self) -> usize {
        let code = StopReason::Stalled.code();
        self.reasons.iter().filter(|&&r| r == code).count()
    }

    /// Fraction of fitted pixels whose solver stalled; 0 when nothing was fitted.
    pub fn stalled_fraction(&self) -> f64 {
        let n = self.fitted();
        if n == 0 {
            0.0
        } else {
            self.stalled() as f64 / n as f64
        }
    }
}

/// Maps plus per-pixel summaries and total solver time.
#[derive(Debug, Clone)]
pub struct ImageFit {
    pub maps: ParametricMaps,
    pub summaries: Vec<Option<FitSummary>>,
    pub solver_time: Duration,
}

struct PixelOutcome {
    k: [f64; 4],
    reason: StopReason,
    iterations: u32,
    summary: Option<FitSummary>,
    elapsed: Duration,
}

/// Causal neighbours `(row-1, col-1..=col+1)` and `(row, col-1)`.
fn causal_neighbors(side: usize, p: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((p / side) as isize, (p % side) as isize);
    [(-1, -1), (-1, 0), (-1, 1), (0, -1)]
        .into_iter()
        .map(move |(dr, dc)| (r + dr, c + dc))
        .filter(move |&(rr, cc)| rr >= 0 && cc >= 0 && (cc as usize) < side && (rr as usize) < side)
        .map(move |(rr, cc)| rr as usize * side + cc as usize)
}

fn all_neighbors(side: usize, p: usize) -> impl Iterator<Item = Option<usize>> {
    let (r, c) = ((p / side) as isize, (p % side) as isize);
    (-1..=1)
        .flat_map(|dr| (-1..=1).map(move |dc| (dr, dc)))
        .filter(|&d| d != (0, 0))
        .map(move |(dr, dc)| {
            let (rr, cc) = (r + dr, c + dc);
            (rr >= 0 && cc >= 0 && (rr as usize) < side && (cc as usize) < side)
                .then(|| rr as usize * side + cc as usize)
        })
}

struct Context<'a> {
    img: &'a DynamicImage,
    base: TacModel,
    settings: &'a FitSettings,
    support: Vec<bool>,
    times: Vec<f64>,
}

impl Context<'_> {
    fn tau(&self) -> f64 {
        match self.settings.solver {
            SolverKind::RegAsTr => self.settings.tr.tau,
            SolverKind::ProjectedLm => self.settings.lm.tau,
        }
    }

    /// Start point and boundary flag from the already fitted causal neighbours.
    fn initial_guess(&self, p: usize, done: &[Option<[f64; 4]>]) -> ([f64; 4], bool) {
        let policy = &self.settings.policy;
        let side = self.img.side;
        let labels = self.img.labels.as_slice();
        let (boundary_by_support, neighbours): (bool, Vec<[f64; 4]>) = match policy.mode {
            InitMode::Production => (
                all_neighbors(side, p).any(|q| q.map_or(true, |q| !self.support[q])),
                causal_neighbors(side, p).filter_map(|q| done[q]).collect(),
            ),
            InitMode::OracleLabels => (
                all_neighbors(side, p).any(|q| q.map_or(true, |q| labels[q] != labels[p])),
                causal_neighbors(side, p)
                    .filter(|&q| labels[q] == labels[p])
                    .filter_map(|q| done[q])
                    .collect(),
            ),
        };
        let mut boundary = boundary_by_support;
        if policy.mode == InitMode::Production && neighbours.len() >= 2 {
            boundary |= (0..4).any(|j| {
                let n = neighbours.len() as f64;
                let mean = neighbours.iter().map(|k| k[j]).sum::<f64>() / n;
                let var = neighbours.iter().map(|k| (k[j] - mean).powi(2)).sum::<f64>() / n;
                mean <= 0.0 || var.sqrt() / mean > policy.cv_threshold
            });
        }
        if policy.neighbor_init && !boundary && neighbours.len() >= policy.min_neighbors.max(1) {
            let n = neighbours.len() as f64;
            let k =
                std::array::from_fn(|j| (neighbours.iter().map(|k| k[j]).sum::<f64>() / n).max(policy.prior_low[j]));
            return (k, false);
        }
        let mut rng = seed::rng(seed::derive(self.settings.seed, seed::FIT, p as u64));
        let k = std::array::from_fn(|j| rng.random_range(policy.prior_low[j]..policy.prior_high[j]));
        (k, boundary)
    }

    fn fit_pixel(&self, p: usize, done: &[Option<[f64; 4]>]) -> Option<PixelOutcome> {
        if !self.support[p] {
            return None;
        }
        let tac = self.img.tac(p);
        let tau1 = noise_sigma_at(&tac, &self.times).ok()?;
        if tau1 == 0.0 && tac.iter().all(|&x| x == 0.0) {
            return None;
        }
        let (k0, boundary) = self.initial_guess(p, done);
        let policy = &self.settings.policy;
        let tau2 = tau1
            * if boundary {
                policy.boundary_multiplier
            } else {
                policy.interior_multiplier
            };
        let plateau = |eps: &[f64]| {
            let j = eps.len() - 1;
            j >= 1 && eps[j] < tau2 && eps[j] > 0.0 && (1.0 - eps[j - 1] / eps[j]).abs() < policy.plateau_tol
        };
        let fit = self
            .base
            .with_blood_fraction(self.img.vmap[p])
            .and_then(|model| ResidualProblem::new(model, tac, tau1 / self.tau()))
            .and_then(|problem| match self.settings.solver {
                SolverKind::RegAsTr => reg_as_tr(&problem, &k0, &self.settings.tr, Some(&plateau)),
                SolverKind::ProjectedLm => projected_lm(&problem, &k0, &self.settings.lm, Some(&plateau)),
            });
        Some(match fit {
            Ok(fit) => PixelOutcome {
                k: [fit.k[0], fit.k[1], fit.k[2], fit.k[3]],
                reason: fit.reason,
                iterations: fit.iterations() as u32,
                summary: Some(fit.summary()),
                elapsed: fit.elapsed,
            },
            Err(e) => {
                log::debug!("pixel {p}: {e}");
                PixelOutcome {
                    k: k0,
                    reason: StopReason::Stalled,
                    iterations: 0,
                    summary: None,
                    elapsed: Duration::ZERO,
                }
            }
        })
    }
}

/// Fit every foreground pixel of `img` and assemble the parametric maps.
///
/// Per pixel, `τ₁` is the noise level of its curve and the discrepancy bound is
/// `δ = τ₁ / τ`, so the discrepancy stop fires at `ε_j ≤ τ₁`. The fit also stops when
/// `ε_j < τ₂` and `|1 − ε_{j−1}/ε_j| < plateau_tol`, with `τ₂` a policy multiple of `τ₁`
/// (larger on boundaries). Interior pixels start from the mean of their fitted causal
/// neighbours; others draw a seeded random start from the prior box. Stalled pixels are
/// replaced by the median of the non-stalled pixels of their region afterwards.
///
/// The foreground is the labelled tissue support; an all-zero curve is treated as background.
pub fn fit_image(
    img: &DynamicImage,
    input: &InputFunction,
    grid: &TimeGrid,
    settings: &FitSettings,
) -> Result<ImageFit> {
    settings.policy.validate()?;
    settings.tr.validate()?;
    settings.lm.validate()?;
    if grid.len() != img.frames {
        return Err(Error::Dimension(format!(
            "{} frames in the image, {} in the grid",
            img.frames,
            grid.len()
        )));
    }
    let ctx = Context {
        img,
        base: TacModel::new(input, grid, 0.0)?,
        settings,
        support: img.labels.foreground(),
        times: grid.midpoints_min(),
    };
    let n = img.pixels();
    let side = img.side;
    let mut done: Vec<Option<[f64; 4]>> = vec![None; n];
    let mut outcomes: Vec<Option<PixelOutcome>> = (0..n).map(|_| None).collect();

    let mut record = |p: usize, o: Option<PixelOutcome>, done: &mut Vec<Option<[f64; 4]>>| {
        if let Some(o) = &o {
            if o.reason != StopReason::Stalled {
                done[p] = Some(o.k);
            }
        }
        outcomes[p] = o;
    };
    match settings.policy.scan {
        ScanOrder::Raster => {
            for p in 0..n {
                let o = ctx.fit_pixel(p, &done);
                record(p, o, &mut done);
            }
        }
        ScanOrder::Wavefront => {
            if side > 0 {
                for key in 0..=3 * (side - 1) {
                    let front: Vec<usize> = (0..side)
                        .filter_map(|r| key.checked_sub(2 * r).filter(|&c| c < side).map(|c| r * side + c))
                        .collect();
                    let results: Vec<(usize, Option<PixelOutcome>)> =
                        front.par_iter().map(|&p| (p, ctx.fit_pixel(p, &done))).collect();
                    for (p, o) in results {
                        record(p, o, &mut done);
                    }
                }
            }
        }
    }

    let mut maps = ParametricMaps::empty(side);
    let mut summaries = Vec::with_capacity(n);
    let mut solver_time = Duration::ZERO;
    for (p, o) in outcomes.into_iter().enumerate() {
        match o {
            Some(o) => {
                for j in 0..4 {
                    maps.k[j][p] = o.k[j].max(0.0);
                }
                maps.reasons[p] = o.reason.code();
                maps.iterations[p] = o.iterations;
                solver_time += o.elapsed;
                summaries.push(o.summary);
            }
            None => summaries.push(None),
        }
    }
    infill_stalled(&mut maps, img);
    Ok(ImageFit {
        maps,
        summaries,
        solver_time,
    })
}

fn infill_stalled(maps: &mut ParametricMaps, img: &DynamicImage) {
    let stalled = StopReason::Stalled.code();
    let labels = img.labels.as_slice();
    for region in 1..=crate::phantom::REGIONS as u8 {
        let members: Vec<usize> = (0..maps.pixels())
            .filter(|&p| labels[p] == region && maps.reasons[p] != 0)
            .collect();
        let bad: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&p| maps.reasons[p] == stalled)
            .collect();
        if bad.is_empty() {
            continue;
        }
        let good: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&p| maps.reasons[p] != stalled)
            .collect();
        for j in 0..4 {
            let mut values: Vec<f64> = good.iter().map(|&p| maps.k[j][p]).collect();
            values.sort_by(f64::total_cmp);
            let median = match values.len() {
                0 => 0.0,
                m if m % 2 == 1 => values[m / 2],
                m => 0.5 * (values[m / 2 - 1] + values[m / 2]),
            };
            for &p in &bad {
                maps.k[j][p] = median;
            }
        }
        for &p in &bad {
            maps.infilled[p] = true;
        }
    }
}
