//! Network Cramér-Rao bound simulator for THz inter-satellite ranging in LEO.
//!
//! Modules follow the processing chain: orbital state propagation, link
//! geometry and TOA Jacobians, impairment-limited ranging variance, beam
//! interference, information-form fusion, opportunistic bistatic sensing, and
//! the study drivers behind the `ncrlb` CLI.

pub mod error;
pub mod experiments;
pub mod fusion;
pub mod impairments;
pub mod interference;
pub mod ioo;
pub mod linalg;
pub mod network;
pub mod orbit;

pub use error::{Error, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Noise reference temperature [K].
pub const T_REF: f64 = 290.0;
