//! Steady-state quadrature squeezing of linearized multimode optomechanical
//! systems: one cavity with an intracavity parametric amplifier, `N`
//! mechanical modes on a phase-dependent hopping chain.
//!
//! The crate is `no_std` (with `alloc`). The pipeline is
//! [`model::validate_config`] -> [`model::build_drift_matrix`] /
//! [`model::build_noise_matrix`] -> [`steady_state::solve_lyapunov`] ->
//! [`analysis::squeezing_report`], wrapped by [`analysis::evaluate`].

#![no_std]

extern crate alloc;

pub mod analysis;
mod error;
pub mod model;
pub mod steady_state;

pub use error::{Error, Result};
pub use model::{Mode, Quadrature, SystemConfig, ValidatedConfig};
