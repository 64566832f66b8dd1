//! Simulation and optimization of insulin bolus pulse inputs for
//! glucose-insulin ODE models.
//!
//! The crate simulates the Bergman minimal model and the Hovorka model
//! under rectangular bolus inputs and meal disturbances, and finds the
//! pulse magnitude, delivery time and duration that minimize the peak
//! plasma glucose concentration subject to a hard floor on the minimum.
//!
//! Structure:
//!
//! - [`models`]: the two dynamical systems, the pulse input and the model
//!   contract the solvers rely on.
//! - [`disturbance`]: the meal absorption cascade.
//! - [`integrate`]: fixed-step RK4 with exact breakpoint alignment.
//! - [`analysis`]: extrema extraction and response shape classification.
//! - [`solvers`]: proper-magnitude bisection, delivery-time and duration
//!   optimizers, parameter sweeps.
//! - [`scenario`]: experiment descriptions, presets, TOML round-tripping.
//! - [`verify`]: randomized property suites (monotonicity, intersection
//!   counts, steady state, nesting).

pub mod analysis;
pub mod disturbance;
pub mod error;
pub mod integrate;
pub mod models;
pub mod scenario;
pub mod solvers;

pub use error::{Error, Result};
