//! Anti-Stokes Brillouin cooling of traveling acoustic phonons in a waveguide.
//!
//! The undepleted pump linearizes the three-wave interaction into a beam
//! splitter between the anti-Stokes optical mode and the acoustic mode.
//! Modules cover the closed-form steady state, moment dynamics, stochastic
//! Langevin ensembles, spectral lineshapes and pump depletion.

pub mod depletion;
pub mod error;
mod linalg;
pub mod langevin;
pub mod model;
pub mod moments;
pub mod spectrum;
pub mod steady;

pub use error::{Error, Result};
pub use model::{
    bose_einstein_occupation, coupling_for_power, coupling_strength, effective_temperature, power_for_coupling,
    Detuning, Drive, RatesConvention, SystemParams,
};

/// Crate version, echoed into output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
