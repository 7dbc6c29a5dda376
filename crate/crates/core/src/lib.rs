//! Parametric imaging of dynamic PET data.
//!
//! The crate is organised around four layers:
//!
//! * [`kinetics`]: the two-compartment FDG model, its exact forward solution for a
//!   piecewise-linear input function and analytic parameter sensitivities.
//! * [`optim`]: non-negatively constrained nonlinear least squares. The main solver is a
//!   regularizing affine-scaling trust-region method whose trust-region multiplier acts as a
//!   Tikhonov parameter; a projected Levenberg-Marquardt solver is provided as a baseline.
//! * [`phantom`]: a synthetic brain experiment (label phantom, input function, dynamic data,
//!   Radon projection, Poisson noise and filtered backprojection).
//! * [`imaging`]: the pixel-wise fitting pipeline and region statistics.
//!
//! [`io`] holds the on-disk dataset format shared by the command-line frontend.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod imaging;
pub mod io;
pub mod kinetics;
pub mod optim;
pub mod phantom;
pub mod seed;

pub use error::{Error, Result};

pub use kinetics::{InputFunction, KineticParams, TacModel, TimeGrid};
pub use optim::{FitResult, LmConfig, StopReason, TrConfig};

pub use imaging::{ParametricMaps, PixelFitPolicy, RegionStats, SolverKind};
pub use phantom::{DynamicImage, GroundTruth, LabelImage, Sinogram};
