//! Grid-based nuclear quantum dynamics compiled to qubit gate programs.
//!
//! The pipeline runs from a discretized one-dimensional Hamiltonian
//! ([`hamiltonian`]) through a reflection block transform ([`symmetry`]),
//! gate synthesis ([`compiler`]), density-matrix simulation
//! ([`simulator`]) and time propagation ([`dynamics`]) to Fourier
//! spectroscopy ([`spectrum`]). [`mps`] extends propagation to several
//! dimensions with tensor trains.

pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod mps;
pub mod simulator;
pub mod spectrum;
pub mod symmetry;
pub mod units;

pub use error::{Error, Result};
