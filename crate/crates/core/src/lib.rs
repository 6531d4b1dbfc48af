//! Simulation and analysis of nuclear forward scattering and delayed
//! fluorescence from ultranarrow isomer resonances.
//!
//! Units throughout: energies in eV (keV where named), times in s, lengths
//! in µm, densities in cm⁻³. Resonance energies inside [`nfs`] and
//! [`hyperfine`] are in units of the natural width Γ₀.

pub mod analysis;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod events;
pub mod flux;
pub mod hyperfine;
pub mod nfs;
pub mod units;

pub use error::{Error, Result};
