//! Offline reinforcement learning with regression (MSE) and HL-Gauss
//! classification (cross-entropy) critics.
//!
//! The crate is organized bottom-up:
//!
//! - [`categorical`]: value support, HL-Gauss transforms and the cross-entropy loss.
//! - [`neural`]: dense ReLU networks, Adam, soft target updates and checkpoints.
//! - [`actors`]: deterministic and Gaussian policy heads.
//! - [`algorithms`]: ReBRAC, IQL and LB-SAC update rules and the training loop.
//! - [`data`]: offline datasets and the CODS v1 file format.
//! - [`envs`]: toy environments, behavior policies and tabular oracles.
//! - [`evaluation`]: rollouts, Expected Online Performance and sweeps.
//! - [`config`]: the JSON run configuration shared by the CLI and sweeps.

pub mod actors;
pub mod algorithms;
pub mod categorical;
pub mod config;
pub mod data;
pub mod envs;
pub mod error;
pub mod evaluation;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
