//! Experiment configuration, read from TOML.
//!
//! Every key has a default, so an empty file is a valid configuration. Unknown keys are
//! rejected. Sections:
//!
//! ```toml
//! seed = 2024                 # master seed, at most 2^63 - 1
//!
//! [phantom]
//! side = 64
//!
//! [input]
//! activity_mbq = 350.0
//! volume_l = 12.7
//! duration_min = 60.0
//! perturbation = 0.0          # relative IF noise c, applied at fit time
//! shape = { t_peak = 1.0, weights = [0.7, 0.2, 0.1], rates = [4.0, 0.25, 0.01] }
//!
//! [grid]
//! durations_s = [10.0, 10.0, ...]   # defaults to the 28-frame FDG protocol
//!
//! [noise]
//! replicates = 3
//! count_scale = 1e4
//! angles = 90
//! filter = "hann"             # or "ram-lak"
//!
//! [fit]
//! solver = "reg-as-tr"        # or "projected-lm"
//! smooth = { enabled = true, sigma = 1.0, window = 3 }
//! [fit.tr]                    # trust-region constants
//! [fit.lm]                    # Levenberg-Marquardt constants
//! [fit.policy]                # initialisation and stopping policy
//!
//! [render]
//! k_max = [0.2, 0.5, 0.2, 0.04]
//! ```

use std::path::{Path, PathBuf};

use petkin::imaging::{gaussian_kernel, PixelFitPolicy, SolverKind};
use petkin::kinetics::TimeGrid;
use petkin::optim::{LmConfig, TrConfig};
use petkin::phantom::{dense_input_times, input_function, Filter, IfShape, NoiseSettings};
use petkin::InputFunction;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub side: usize,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig { side: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub activity_mbq: f64,
    pub volume_l: f64,
    pub duration_min: f64,
    /// Relative input-function noise used when fitting.
    pub perturbation: f64,
    pub shape: IfShape,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            activity_mbq: 350.0,
            volume_l: 12.7,
            duration_min: 60.0,
            perturbation: 0.0,
            shape: IfShape::default(),
        }
    }
}

impl InputConfig {
    pub fn build(&self) -> petkin::Result<InputFunction> {
        let times = dense_input_times(self.duration_min, self.shape.t_peak);
        input_function(self.activity_mbq, self.volume_l, &self.shape, &times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub durations_s: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let grid = TimeGrid::standard_fdg();
        GridConfig {
            durations_s: grid.starts().iter().zip(grid.ends()).map(|(s, e)| e - s).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Noisy datasets to generate besides the noise-free reference.
    pub replicates: usize,
    pub count_scale: f64,
    pub angles: usize,
    pub filter: Filter,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseSettings::default();
        NoiseConfig {
            replicates: 3,
            count_scale: n.count_scale,
            angles: n.angles,
            filter: n.filter,
        }
    }
}

impl NoiseConfig {
    pub fn settings(&self) -> NoiseSettings {
        NoiseSettings {
            count_scale: self.count_scale,
            angles: self.angles,
            filter: self.filter,
        }
    }
}

/// Gaussian smoothing of noisy reconstructions before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothConfig {
    pub enabled: bool,
    pub sigma: f64,
    pub window: usize,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig {
            enabled: true,
            sigma: 1.0,
            window: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub solver: SolverKind,
    pub smooth: SmoothConfig,
    pub tr: TrConfig,
    pub lm: LmConfig,
    pub policy: PixelFitPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Upper end of the fixed grey scale per rate constant; the lower end is 0.
    pub k_max: [f64; 4],
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            k_max: [0.2, 0.5, 0.2, 0.04],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; the `--out` flag takes precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub phantom: PhantomConfig,
    pub input: InputConfig,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub fit: FitConfig,
    pub render: RenderConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2024,
            out: None,
            phantom: PhantomConfig::default(),
            input: InputConfig::default(),
            grid: GridConfig::default(),
            noise: NoiseConfig::default(),
            fit: FitConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> petkin::Result<TimeGrid> {
        TimeGrid::from_durations(&self.grid.durations_s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let config = |msg: String| Err(CliError::Config(msg));
        if self.seed > i64::MAX as u64 {
            return config(format!("seed {} exceeds 2^63 - 1", self.seed));
        }
        if self.phantom.side < 32 {
            return config(format!("phantom side {} is below the minimum of 32", self.phantom.side));
        }
        let c = self.input.perturbation;
        if !(0.0..1.0).contains(&c) {
            return config(format!("input perturbation {c} must lie in [0, 1)"));
        }
        if !(self.noise.count_scale > 0.0 && self.noise.count_scale.is_finite()) || self.noise.angles == 0 {
            return config("noise needs a positive count scale and at least one angle".into());
        }
        if self.fit.smooth.enabled {
            gaussian_kernel(self.fit.smooth.sigma, self.fit.smooth.window)?;
        }
        if self.render.k_max.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return config("render.k_max entries must be positive".into());
        }
        self.grid()?;
        self.input.build()?;
        self.fit.tr.validate()?;
        self.fit.lm.validate()?;
        self.fit.policy.validate()?;
        Ok(())
    }

    /// Copy stored next to the outputs; the output path is left out so that the same
    /// experiment written to two places produces identical files.
    pub fn stored(&self) -> Self {
        ExperimentConfig {
            out: None,
            ..self.clone()
        }
    }
}
