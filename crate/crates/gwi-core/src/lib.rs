//! Simulation and moment analysis of subcritical multitype Galton-Watson
//! processes with immigration.
//!
//! The crate is `no_std` + `alloc`; all randomness comes from explicitly
//! passed streams so that results are reproducible and parallelizable.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod certificate;
pub mod error;
pub mod laws;
pub mod matrix;
pub mod process;
pub mod rng;

pub mod stats;

mod math;

pub use error::Error;
pub use laws::{MomentValue, OffspringSpec, ScalarLaw, VectorLaw};
pub use matrix::{MeanMatrix, SpectralInfo};
pub use process::{GwiModel, PopulationVec, Trajectory};
