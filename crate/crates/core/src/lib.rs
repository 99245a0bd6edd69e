//! Pseudospectral simulation of the mushy-region Stefan problem driven by Stratonovich
//! transport noise on the 2D torus, its deterministic scaling limit, and the Monte Carlo
//! harness comparing the two.

pub mod config;
pub mod error;
pub mod experiment;
pub mod limit;
pub mod manifest;
pub mod noise;
pub mod phase;
pub mod solver;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
