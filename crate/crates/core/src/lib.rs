//! Ground-state analysis of the Lipkin model
//! `H = eps J_z + (gamma_x / N) J_x^2 + (gamma_y / N) J_y^2`.
//!
//! Three routes are provided: the coherent-state mean field
//! ([`meanfield`]), the truncated Holstein-Primakoff Hamiltonian solved by a
//! Bogoliubov transformation ([`bogoliubov`]), and exact diagonalization in
//! parity blocks ([`spectrum`]). [`scaling`] turns these into finite-size
//! exponents; [`cli`] exposes batch sweeps.

pub mod bogoliubov;
pub mod cli;
pub mod error;
pub mod meanfield;
pub mod model;
pub mod scaling;
pub mod spectrum;
pub mod tridiag;

pub use error::{Error, Parity, Result};
pub use model::{canonicalize, classify_phase, ModelParams, PhaseRegion};
