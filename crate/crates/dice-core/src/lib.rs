//! Diffusion consensus equilibrium reconstruction for sparse-view CT.
//!
//! The crate is `no_std` + `alloc`: all algorithms (projection physics,
//! schedules, agents, the consensus solver, the sampler, baselines, and
//! metrics) live here, while file formats and the CLI live in the
//! companion `dice-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod baselines;
pub mod ce;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod vecn;

pub use error::{Error, Result};
