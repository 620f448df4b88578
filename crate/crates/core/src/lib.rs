//! Characteristic-net solver and verification tools for the quadrant-into-vacuum
//! Riemann problem of the pressure gradient equation
//! `(p_t / p)_t - Δp = 0` in self-similar polar coordinates.

pub mod boundary;
pub mod coords;
pub mod error;
pub mod solver;
pub mod vacuum;
pub mod verify;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Degeneracy, Error, Result};
