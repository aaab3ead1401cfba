//! Age-of-information aware task offloading across several base stations.
//!
//! The crate bundles the radio/queue model, a slotted environment, a convex
//! per-station resource allocator, small Q-networks with branching heads, the
//! learning agents and an experiment driver used by the `aoimec` binary.

pub mod agents;
pub mod allocator;
pub mod config;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod joint;
pub mod nn;
pub mod system_model;

pub use config::SystemConfig;
pub use error::{Error, Result};
