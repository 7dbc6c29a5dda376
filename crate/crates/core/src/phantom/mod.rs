//! Synthetic brain experiment.
//!
//! A four-region label phantom carries one set of kinetic parameters per region. Dynamic
//! images are generated pixel by pixel from the compartment model, then each frame can be
//! projected, corrupted with Poisson noise and reconstructed by filtered backprojection.

mod input;
mod labels;
mod noise;
mod radon;
mod simulate;

pub use input::{dense_input_times, input_function, perturb_if, IfShape};
pub use labels::{make_phantom, read_pgm, write_pgm, LabelImage, REGIONS};
pub use noise::add_poisson;
pub use radon::{default_angles, fbp, radon, Filter, Sinogram};
pub use simulate::{
    reconstruct_frames, simulate_dynamic, DynamicImage, GroundTruth, NoiseSettings, Provenance, REFERENCE_PARAMS,
};
