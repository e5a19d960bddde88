//! Numerical laboratory for a 1-D transmission Euler-Bernoulli plate with
//! localized Kelvin-Voigt damping: discrete generator assembly, contraction
//! semigroup evolution, spectrum and resolvent sweeps along the imaginary
//! axis, and construction of two-phase Carleman-type weight functions on an
//! annular 2-D domain.

pub mod carleman;
pub mod cli;
pub mod disc;
pub mod error;
pub mod evolution;
pub mod generator;
pub mod model;
pub mod spectral;

pub use error::Error;
