//! Simulation and numerical verification of weighted functionals of
//! isotropic Gaussian random fields whose spectral densities have power-law
//! singularities at zero and on spheres of non-zero radius.

pub mod config;
pub mod error;
pub mod fieldsim;
pub mod functionals;
pub mod harness;
pub mod io;
pub mod limits;
pub mod models;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectrum;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
