use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use petkin::imaging::{deblur_gaussian, fit_image, FitSettings, ParametricMaps, SolverKind};
use petkin::io::{read_dataset, read_maps, write_dataset, write_maps, Dataset, MapsHeader, FORMAT_VERSION};
use petkin::phantom::{make_phantom, perturb_if, reconstruct_frames, simulate_dynamic, write_pgm, GroundTruth};
use petkin::seed;

use crate::config::ExperimentConfig;
use crate::render::render_all;
use crate::report::{evaluate_method, write_reports, MethodEvaluation};
use crate::{io_err, CliError};

pub const REFERENCE: &str = "reference";
pub const FITS: &str = "fits";

fn replicate_name(r: usize) -> String {
    format!("replicate-{r:03}")
}

/// Seed index of a dataset; the noise-free reference sits on its own branch.
fn dataset_index(replicate: Option<usize>) -> u64 {
    replicate.map_or(u64::MAX, |r| r as u64)
}

/// Name of a fit method: the solver, with the input-function noise level when non-zero.
pub fn method_label(solver: SolverKind, if_noise: f64) -> String {
    if if_noise > 0.0 {
        format!("{solver}-if{:02}", (if_noise * 100.0).round() as u32)
    } else {
        solver.to_string()
    }
}

fn remove_if_present(path: &Path) -> Result<(), CliError> {
    let result = if path.is_dir() {
        fs::remove_dir_all(path)
    } else if path.exists() {
        fs::remove_file(path)
    } else {
        return Ok(());
    };
    result.map_err(|e| io_err(path, e))
}

/// Writes the noise-free reference and `noise.replicates` noisy datasets.
///
/// Outputs of an earlier run in the same directory (datasets, fits, reports, renders) are
/// removed first; other files are left alone.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let entries = fs::read_dir(out).map_err(|e| io_err(out, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(out, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("replicate-") {
            remove_if_present(&entry.path())?;
        }
    }
    for name in [REFERENCE, FITS, "render", "evaluation.csv", "rmse.csv", "report.txt"] {
        remove_if_present(&out.join(name))?;
    }

    let gt = GroundTruth::reference(make_phantom(cfg.phantom.side)?);
    let input = cfg.input.build()?;
    let grid = cfg.grid()?;
    let clean = simulate_dynamic(&gt, &input, &grid)?;
    let text = cfg.stored().to_toml()?;
    fs::write(out.join("config.toml"), text).map_err(|e| io_err(&out.join("config.toml"), e))?;
    write_pgm(&gt.labels, &out.join("labels.pgm"))?;

    let reference = Dataset {
        grid: grid.clone(),
        image: clean,
        input,
        regions: gt.regions,
        replicate: None,
        sinograms: Vec::new(),
    };
    write_dataset(&out.join(REFERENCE), &reference)?;
    let noise = cfg.noise.settings();
    for r in 0..cfg.noise.replicates {
        let replicate_seed = seed::derive(cfg.seed, seed::REPLICATE, r as u64);
        let (image, sinograms) = reconstruct_frames(&reference.image, &noise, replicate_seed)?;
        let data = Dataset {
            image,
            sinograms,
            replicate: Some(r),
            ..reference.clone()
        };
        write_dataset(&out.join(replicate_name(r)), &data)?;
    }
    Ok(())
}

/// Dataset directories to fit: the replicates if any exist, otherwise the reference.
pub fn dataset_dirs(out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut replicates = Vec::new();
    let entries = fs::read_dir(out).map_err(|e| io_err(out, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(out, e))?;
        if entry.file_name().to_string_lossy().starts_with("replicate-") && entry.path().is_dir() {
            replicates.push(entry.path());
        }
    }
    replicates.sort();
    if replicates.is_empty() {
        let reference = out.join(REFERENCE);
        if !reference.is_dir() {
            return Err(CliError::Io(format!(
                "{}: no datasets; run `simulate` first",
                out.display()
            )));
        }
        replicates.push(reference);
    }
    Ok(replicates)
}

/// Timing and completion summary of one `fit` run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub method: String,
    pub datasets: usize,
    pub fitted: usize,
    pub stalled: usize,
    pub solver_time: Duration,
}

impl FitReport {
    pub fn mean_pixel_time(&self) -> Duration {
        if self.fitted == 0 {
            Duration::ZERO
        } else {
            self.solver_time / self.fitted as u32
        }
    }
}

/// Fits every dataset with `cfg.fit.solver` and input-function noise `cfg.input.perturbation`.
///
/// The perturbed input of dataset `r` draws from `derive(derive(seed, REPLICATE, r), INPUT, 0)`
/// and its random starts from `derive(seed, FIT, r)`. Noisy datasets are smoothed first when
/// enabled. Maps are written even when the run fails with a stall epidemic.
pub fn cmd_fit(cfg: &ExperimentConfig, out: &Path) -> Result<FitReport, CliError> {
    cfg.validate()?;
    let solver = cfg.fit.solver;
    let c = cfg.input.perturbation;
    let method = method_label(solver, c);
    let method_dir = out.join(FITS).join(&method);
    remove_if_present(&method_dir)?;

    let mut report = FitReport {
        method: method.clone(),
        datasets: 0,
        fitted: 0,
        stalled: 0,
        solver_time: Duration::ZERO,
    };
    for dir in dataset_dirs(out)? {
        let data = read_dataset(&dir)?;
        let index = dataset_index(data.replicate);
        let image = if data.image.provenance.noise.is_some() && cfg.fit.smooth.enabled {
            deblur_gaussian(&data.image, cfg.fit.smooth.sigma, cfg.fit.smooth.window)?
        } else {
            data.image.clone()
        };
        let input_seed = seed::derive(seed::derive(cfg.seed, seed::REPLICATE, index), seed::INPUT, 0);
        let input = perturb_if(&data.input, c, input_seed)?;
        let settings = FitSettings {
            solver,
            tr: cfg.fit.tr.clone(),
            lm: cfg.fit.lm.clone(),
            policy: cfg.fit.policy.clone(),
            seed: seed::derive(cfg.seed, seed::FIT, index),
        };
        let fit = fit_image(&image, &input, &data.grid, &settings)?;

        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let target = method_dir.join(&name);
        let header = MapsHeader {
            format_version: FORMAT_VERSION,
            side: fit.maps.side,
            method: method.clone(),
            replicate: data.replicate,
        };
        write_maps(&target, &fit.maps, &header)?;
        let mut lines = String::new();
        for (p, s) in fit.summaries.iter().enumerate() {
            if let Some(s) = s {
                let value = serde_json::json!({ "pixel": p, "fit": s });
                lines.push_str(&value.to_string());
                lines.push('\n');
            }
        }
        let path = target.join("summaries.jsonl");
        fs::write(&path, lines).map_err(|e| io_err(&path, e))?;

        report.datasets += 1;
        report.fitted += fit.maps.fitted();
        report.stalled += fit.maps.stalled();
        report.solver_time += fit.solver_time;
    }
    if report.stalled * 10 > report.fitted {
        return Err(CliError::StallEpidemic {
            stalled: report.stalled,
            fitted: report.fitted,
        });
    }
    Ok(report)
}

/// Maps of every dataset fitted by each method, sorted by method then dataset.
pub fn load_fits(out: &Path) -> Result<Vec<(String, Vec<ParametricMaps>)>, CliError> {
    let root = out.join(FITS);
    let mut methods: Vec<PathBuf> = match fs::read_dir(&root) {
        Ok(entries) => entries
            .map(|e| e.map(|e| e.path()).map_err(|err| io_err(&root, err)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|p| p.is_dir())
            .collect(),
        Err(e) => return Err(io_err(&root, format!("{e}; run `fit` first"))),
    };
    methods.sort();
    let mut all = Vec::new();
    for dir in methods {
        let mut sets: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| io_err(&dir, err)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|p| p.is_dir())
            .collect();
        sets.sort();
        let maps = sets
            .iter()
            .map(|s| read_maps(s).map(|(m, _)| m))
            .collect::<petkin::Result<Vec<_>>>()?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        all.push((name, maps));
    }
    Ok(all)
}

pub fn ground_truth(out: &Path) -> Result<GroundTruth, CliError> {
    Ok(read_dataset(&out.join(REFERENCE))?.ground_truth()?)
}

/// Region statistics and RMSE of every fitted method against the ground truth.
pub fn cmd_evaluate(out: &Path) -> Result<Vec<MethodEvaluation>, CliError> {
    let gt = ground_truth(out)?;
    let evaluations = load_fits(out)?
        .into_iter()
        .map(|(method, maps)| evaluate_method(&method, &maps, &gt))
        .collect::<Result<Vec<_>, _>>()?;
    write_reports(out, &evaluations)?;
    Ok(evaluations)
}

/// Mean maps of every method, the ground truth and the last frame of the reference and
/// first replicate, as 8-bit PNG with a fixed scale per rate constant.
pub fn cmd_render(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let gt = ground_truth(out)?;
    let fits = match out.join(FITS).is_dir() {
        true => load_fits(out)?,
        false => Vec::new(),
    };
    let mut frames = vec![(REFERENCE.to_string(), read_dataset(&out.join(REFERENCE))?.image)];
    let first = out.join(replicate_name(0));
    if first.is_dir() {
        frames.push((replicate_name(0), read_dataset(&first)?.image));
    }
    render_all(&out.join("render"), &gt, &fits, &frames, &cfg.render.k_max)
}
