//! Command-line experiment driver: simulate datasets, fit parametric maps, evaluate them
//! against the ground truth and render images.
//!
//! All commands work inside one experiment directory:
//!
//! ```text
//! <out>/config.toml                      effective configuration
//! <out>/labels.pgm                       label phantom
//! <out>/reference/                       noise-free dataset
//! <out>/replicate-000/ ...               noisy datasets
//! <out>/fits/<method>/<dataset>/         maps and per-pixel fit summaries
//! <out>/evaluation.csv, rmse.csv, report.txt
//! <out>/render/...                       PNG images and scale.json
//! ```
//!
//! `<method>` is the solver name, suffixed with `-if<percent>` when the input function was
//! perturbed. Every output byte is a function of the configuration and seed; timings go to
//! stdout only.

pub mod commands;
pub mod config;
pub mod render;
pub mod report;

use std::fmt;

pub use commands::{cmd_evaluate, cmd_fit, cmd_render, cmd_simulate, method_label, FitReport};
pub use config::ExperimentConfig;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit code 2).
    Config(String),
    /// Unreadable input or unwritable output (exit code 3).
    Io(String),
    /// More than 10% of fitted pixels stalled (exit code 4); outputs are still written.
    StallEpidemic { stalled: usize, fitted: usize },
    /// Any other numerical failure (exit code 1).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::StallEpidemic { .. } => 4,
            CliError::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::StallEpidemic { stalled, fitted } => {
                write!(f, "{stalled} of {fitted} fitted pixels stalled (more than 10%)")
            }
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<petkin::Error> for CliError {
    fn from(e: petkin::Error) -> Self {
        use petkin::Error as E;
        match e {
            E::Config(_) | E::InvalidParams(_) | E::InvalidGrid(_) | E::InvalidInputFunction(_) | E::Phantom(_) => {
                CliError::Config(e.to_string())
            }
            E::Io { .. } | E::Format { .. } | E::Image(_) | E::Json(_) | E::Dimension(_) | E::Geometry(_) => {
                CliError::Io(e.to_string())
            }
            E::NonFinite(_) | E::ZeroGradient => CliError::Numerical(e.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
