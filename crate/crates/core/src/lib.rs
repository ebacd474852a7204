//! Semi-discrete Landau–Lifshitz–Gilbert and harmonic map heat flow on a
//! uniform 2-D lattice.

pub mod error;
pub mod grid;
pub mod target;
pub mod sample;
pub mod dynamics;
pub mod kernels;
pub mod interpolant;
pub mod frames;
pub mod analysis;
#[cfg(feature = "cli")]
pub mod experiment;

pub use error::{LatticeError, Result};
