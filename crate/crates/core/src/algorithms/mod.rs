//! Critic, actor and value update rules for the three algorithm families,
//! each usable with a scalar (squared error) or categorical (cross-entropy)
//! critic head, plus the training loop.

mod config;
pub mod critic;
pub mod fitted;
pub mod iql;
pub mod lbsac;
pub mod rebrac;
pub mod train;

pub use config::{IqlConfig, LbSacConfig, NetworkConfig, RebracConfig};
pub use critic::{CriticEnsemble, CriticHead};
pub use fitted::{FittedTd, FittedTdConfig};
pub use iql::Iql;
pub use lbsac::LbSac;
pub use rebrac::Rebrac;
pub use train::{build_head, dataset_support, train, Agent, StepStats, LOG_HEADER};
