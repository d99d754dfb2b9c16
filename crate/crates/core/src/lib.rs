//! Spectral experiments for order-one isotropic perturbations of the harmonic oscillator.

pub mod cli;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod quadrature;
pub mod quantize;
pub mod special;
pub mod spectra;
pub mod symbols;
pub mod trace;

pub use error::{Error, Result};
