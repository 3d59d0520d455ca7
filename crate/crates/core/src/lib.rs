//! Simulation of diffusive molecular communication links: channel model,
//! modulation, detection, equalization, estimation and BER harness.

pub mod channel;
pub mod config;
pub mod detection;
pub mod equalization;
pub mod estimation;
pub mod error;
pub mod harness;
pub mod modulation;
pub mod presets;
pub mod results;
pub mod rng;

pub use error::{Error, Result};
