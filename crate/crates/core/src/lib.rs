//! Coordination games with zero-sum gifting.
//!
//! - [`game`]: normal-form games, the coordination sub-classes, graph and
//!   repeated variants, and the gifting extension.
//! - [`equilibrium`]: pure Nash equilibria and their labels.
//! - [`dynamics`]: exact-gradient softmax learning flow and basin sweeps.
//! - [`learner`]: independent Q-learning agents.
//! - [`experiments`]: multi-seed studies and their aggregation.

pub mod dynamics;
pub mod equilibrium;
pub mod experiments;
pub mod error;
pub mod game;
pub mod learner;

pub use error::{Error, Result};
