//! Physically modelled adversarial haze: scattering-model synthesis,
//! constrained momentum attacks on haze parameters, pixel-space baselines,
//! a small reference CNN with exact gradients, and evaluation tooling.

pub mod attack;
pub mod classifier;
pub mod error;
pub mod harness;
pub mod haze;
pub mod imagecore;
pub mod metrics;

pub use error::{Error, Result};
