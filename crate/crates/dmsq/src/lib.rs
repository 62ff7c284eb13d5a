//! Configuration files, parameter sweeps, figure presets and the `dmsq`
//! command-line tool, built on [`dmsq_core`].

pub mod cli;
pub mod config;
pub mod params;
pub mod presets;
pub mod sweep;

pub use dmsq_core as core;
