//! Torus discretisation, Fourier transforms, spectral differential operators and
//! zero-mean Sobolev norms.

mod field;
mod grid;
pub mod snapshot;

pub use field::{
    dealias, divergence, gradient, h_norm, inverse_transform, laplacian, partial, transform,
    ScalarField, Spectrum, VectorField,
};
pub(crate) use field::h_norm_bins;
pub use grid::TorusGrid;
