//! Experiment runner around dice-core: config files, image and sinogram
//! formats, the staged pipeline, and parameter sweeps. The `dice` binary
//! is a thin argument layer over this crate.

pub mod config;
pub mod error;
pub mod pgm;
pub mod runner;
pub mod sino_file;
