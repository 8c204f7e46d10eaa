//! SAC with an N-critic min-ensemble and a learned temperature.

use crate::actors::{GaussianPolicy, Squash};
use crate::data::Batch;
use crate::neural::{AdamState, LrSchedule, Matrix, Mode, ParamSet};
use crate::rng::Rng;
use crate::Result;

use super::critic::{action_columns, critic_input, CriticEnsemble, CriticHead};
use super::{LbSacConfig, NetworkConfig};

/// Temperature loss `mean(-log_alpha * (logp + target_entropy))` and its derivative.
pub fn alpha_loss_and_grad(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let n = log_probs.len() as f64;
    let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / n;
    (-log_alpha * mean, -mean)
}

#[derive(Debug, Clone)]
pub struct LbSac {
    pub cfg: LbSacConfig,
    pub actor: GaussianPolicy,
    pub actor_opt: AdamState,
    pub critics: CriticEnsemble,
    pub log_alpha: f64,
    pub alpha_opt: AdamState,
    pub target_entropy: f64,
}

impl LbSac {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        network: &NetworkConfig,
        head: CriticHead,
        cfg: LbSacConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = GaussianPolicy::init(
            obs_dim,
            act_dim,
            (network.hidden_dim, network.n_hidden_layers),
            Squash::Tanh,
            0.0,
            rng,
        )?;
        let critics = CriticEnsemble::new(obs_dim, act_dim, network, head, cfg.n_critics, cfg.critic_lr, rng)?;
        Ok(Self {
            actor_opt: AdamState::for_params(&actor.params, cfg.actor_lr, LrSchedule::Constant),
            actor,
            critics,
            log_alpha: 0.0,
            alpha_opt: AdamState::new(1, cfg.alpha_lr, LrSchedule::Constant),
            target_entropy: cfg.target_entropy.unwrap_or(-(act_dim as f64)),
            cfg,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    fn obs_dim(&self) -> usize {
        self.actor.spec.input_dim
    }

    /// Soft TD targets with next actions sampled from the current actor.
    pub fn critic_targets(&self, batch: &Batch, rng: &mut Rng) -> Result<Vec<f64>> {
        let sample = self
            .actor
            .sample_batch(&self.actor.params, &batch.next_observations, rng, Mode::Eval)?;
        let next_q = self
            .critics
            .target_min(&critic_input(&batch.next_observations, &sample.actions))?;
        let alpha = self.alpha();
        Ok((0..batch.len())
            .map(|i| {
                let soft_q = next_q[i] - alpha * sample.log_probs[i];
                batch.rewards[i] + (1.0 - batch.dones[i]) * self.cfg.gamma * soft_q
            })
            .collect())
    }

    pub fn critic_loss_and_grads(&self, batch: &Batch, rng: &mut Rng) -> Result<(f64, Vec<ParamSet>, f64)> {
        let y = self.critic_targets(batch, rng)?;
        let x = critic_input(&batch.observations, &batch.actions);
        let (loss, grads, q) = self.critics.loss_and_grads(&x, &y)?;
        Ok((loss, grads, q.iter().sum::<f64>() / q.len() as f64))
    }

    /// Critic step followed by the soft target update.
    pub fn critic_step(&mut self, batch: &Batch, rng: &mut Rng) -> Result<(f64, f64)> {
        let (loss, grads, mean_q) = self.critic_loss_and_grads(batch, rng)?;
        self.critics.apply(&grads)?;
        self.critics.soft_update_targets(self.cfg.tau)?;
        Ok((loss, mean_q))
    }

    /// Reparameterized actor loss `mean(alpha * logp - Q_min)`, its gradient,
    /// and the sampled log-probabilities.
    pub fn actor_loss_and_grad(&self, batch: &Batch, rng: &mut Rng) -> Result<(f64, ParamSet, Vec<f64>)> {
        let n = batch.len() as f64;
        let alpha = self.alpha();
        let sample = self
            .actor
            .sample_batch(&self.actor.params, &batch.observations, rng, Mode::Eval)?;
        let fwd = self
            .critics
            .forward_min(&critic_input(&batch.observations, &sample.actions))?;
        let loss = sample
            .log_probs
            .iter()
            .zip(&fwd.values)
            .map(|(lp, q)| alpha * lp - q)
            .sum::<f64>()
            / n;
        let d_q = vec![-1.0 / n; batch.len()];
        let d_input = self.critics.min_input_grad(&fwd, &d_q)?;
        let d_actions: Matrix = action_columns(&d_input, self.obs_dim());
        let d_lp = vec![alpha / n; batch.len()];
        let grad = self
            .actor
            .sample_backward(&self.actor.params, &sample, &d_actions, &d_lp)?;
        Ok((loss, grad, sample.log_probs))
    }

    /// Actor step then temperature step on the same samples.
    pub fn actor_alpha_step(&mut self, batch: &Batch, rng: &mut Rng) -> Result<(f64, f64)> {
        let (loss, grad, log_probs) = self.actor_loss_and_grad(batch, rng)?;
        self.actor_opt.step(&mut self.actor.params, &grad)?;
        let (alpha_loss, d_log_alpha) = alpha_loss_and_grad(self.log_alpha, &log_probs, self.target_entropy);
        let mut la = [self.log_alpha];
        self.alpha_opt.update(&mut la, &[d_log_alpha])?;
        self.log_alpha = la[0];
        Ok((loss, alpha_loss))
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.is_finite() && self.critics.is_finite() && self.log_alpha.is_finite()
    }
}
