//! Simulator for a two-species reactive polymeric fluid coupling
//! incompressible flow with Fokker-Planck dumbbell kinetics.

pub mod config;
pub mod config_space;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod micromacro;
pub mod reaction;
pub mod verify;

pub use config::{Scenario, SimConfig};
pub use error::{Error, Result};
pub use micromacro::{Model, SimState};
