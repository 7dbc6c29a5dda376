//! Pixel-wise parametric reconstruction: smoothing, per-pixel noise level, fitting loop and
//! region statistics.

mod fit;
mod noise;
mod smooth;
mod stats;

pub use fit::{fit_image, FitSettings, ImageFit, InitMode, ParametricMaps, PixelFitPolicy, ScanOrder, SolverKind};
pub use noise::{noise_sigma, noise_sigma_at};
pub use smooth::{deblur_gaussian, gaussian_kernel};
pub use stats::{region_stats, RegionStats, PARAMETER_NAMES};
