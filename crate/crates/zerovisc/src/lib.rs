//! Zero-viscosity limit of Navier-Stokes in the half-space: boundary-layer
//! expansions, a reference Navier-Stokes solver, and the study that compares them.

pub mod assemble;
pub mod banded;
pub mod elliptic;
pub mod error;
pub mod euler;
pub mod field;
pub mod grid;
pub mod norms;
pub mod ns;
pub mod prandtl;
pub mod rk;
pub mod snapshot;
pub mod split;
pub mod study;

pub use error::{Error, Result};
