//! Collective cavity scattering by one-dimensional arrays of multilevel atoms.
//!
//! The crate computes steady-state cavity photon numbers for atoms held at
//! controlled positions along a standing-wave cavity mode and driven from the
//! side, including thermal position spread, Zeeman-state mixing, polarization
//! of the emitted light and the atom-induced cavity shift and broadening.

pub mod atomic;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod polarization;
pub mod spectra;
pub mod steadystate;

pub use error::{Error, Result};
