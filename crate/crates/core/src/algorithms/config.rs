use serde::{Deserialize, Serialize};

use crate::neural::MlpSpec;
use crate::{Error, Result};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_common(name: &str, gamma: f64, tau: f64, batch_size: usize, lrs: &[f64]) -> Result<()> {
    check(gamma > 0.0 && gamma < 1.0, || format!("{name}.gamma must be in (0, 1), got {gamma}"))?;
    check(tau > 0.0 && tau <= 1.0, || format!("{name}.tau must be in (0, 1], got {tau}"))?;
    check(batch_size >= 1, || format!("{name}.batch_size must be >= 1"))?;
    for &lr in lrs {
        check(lr > 0.0 && lr.is_finite(), || format!("{name} learning rates must be positive, got {lr}"))?;
    }
    Ok(())
}

/// Hidden-layer shape shared by every network of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_dim: usize,
    pub n_hidden_layers: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            n_hidden_layers: 3,
        }
    }
}

impl NetworkConfig {
    pub fn spec(&self, input_dim: usize, output_dim: usize) -> MlpSpec {
        MlpSpec::new(input_dim, self.hidden_dim, self.n_hidden_layers, output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.hidden_dim >= 1, || "network.hidden_dim must be >= 1".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RebracConfig {
    /// Actor behavior-cloning penalty weight.
    pub beta1: f64,
    /// Critic-target behavior-cloning penalty weight.
    pub beta2: f64,
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub tau: f64,
    pub gamma: f64,
    pub normalize_q: bool,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_update_every: u64,
}

impl Default for RebracConfig {
    fn default() -> Self {
        Self {
            beta1: 0.01,
            beta2: 0.01,
            policy_noise: 0.2,
            noise_clip: 0.5,
            tau: 5e-3,
            gamma: 0.99,
            normalize_q: true,
            batch_size: 1024,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            actor_update_every: 2,
        }
    }
}

impl RebracConfig {
    pub fn validate(&self) -> Result<()> {
        check_common("rebrac", self.gamma, self.tau, self.batch_size, &[self.actor_lr, self.critic_lr])?;
        check(self.beta1 >= 0.0 && self.beta2 >= 0.0, || "rebrac.beta1/beta2 must be >= 0".into())?;
        check(self.noise_clip >= 0.0, || "rebrac.noise_clip must be >= 0".into())?;
        check(self.policy_noise >= 0.0, || "rebrac.policy_noise must be >= 0".into())?;
        check(self.actor_update_every >= 1, || "rebrac.actor_update_every must be >= 1".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IqlConfig {
    pub expectile: f64,
    /// Advantage inverse temperature.
    pub inv_temperature: f64,
    pub adv_clip: f64,
    pub tau: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_lr: f64,
    /// Horizon of the actor's cosine schedule; the run length when unset.
    pub lr_decay_steps: Option<u64>,
    pub dropout_rate: f64,
}

impl Default for IqlConfig {
    fn default() -> Self {
        Self {
            expectile: 0.7,
            inv_temperature: 3.0,
            adv_clip: 100.0,
            tau: 5e-3,
            gamma: 0.99,
            batch_size: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            value_lr: 3e-4,
            lr_decay_steps: None,
            dropout_rate: 0.0,
        }
    }
}

impl IqlConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            "iql",
            self.gamma,
            self.tau,
            self.batch_size,
            &[self.actor_lr, self.critic_lr, self.value_lr],
        )?;
        check(self.expectile > 0.0 && self.expectile < 1.0, || {
            format!("iql.expectile must be in (0, 1), got {}", self.expectile)
        })?;
        check(self.inv_temperature > 0.0, || "iql.inv_temperature must be > 0".into())?;
        check(self.adv_clip > 0.0, || "iql.adv_clip must be > 0".into())?;
        check((0.0..1.0).contains(&self.dropout_rate), || "iql.dropout_rate must be in [0, 1)".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbSacConfig {
    pub n_critics: usize,
    pub tau: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    /// Defaults to `-action_dim` when unset.
    pub target_entropy: Option<f64>,
}

impl Default for LbSacConfig {
    fn default() -> Self {
        Self {
            n_critics: 10,
            tau: 5e-3,
            gamma: 0.99,
            batch_size: 1024,
            actor_lr: 6e-4,
            critic_lr: 6e-4,
            alpha_lr: 6e-4,
            target_entropy: None,
        }
    }
}

impl LbSacConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(
            "lbsac",
            self.gamma,
            self.tau,
            self.batch_size,
            &[self.actor_lr, self.critic_lr, self.alpha_lr],
        )?;
        check(self.n_critics >= 2, || format!("lbsac.n_critics must be >= 2, got {}", self.n_critics))
    }
}
