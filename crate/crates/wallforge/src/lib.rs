//! Numerical laboratory for domain walls in coupled Gross-Pitaevskii
//! systems: stationary profiles, linearized spectra, Hamiltonian dynamics,
//! and pinning by localized external potentials.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod pinning;
pub mod profile;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
