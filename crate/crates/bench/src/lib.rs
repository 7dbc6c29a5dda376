//! Criterion benchmarks for petkin; see `benches/`.
//!
//! `solvers` times the forward model, the model with its Jacobian and single-voxel fits;
//! `imaging` times the Radon transform, filtered backprojection and whole-image fits.
