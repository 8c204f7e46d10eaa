//! Behavior-regularized actor-critic with twin critics and a deterministic actor.

use crate::actors::DeterministicPolicy;
use crate::data::Batch;
use crate::neural::{soft_update, AdamState, LrSchedule, Matrix, ParamSet};
use crate::rng::{normal, Rng};
use crate::{Error, Result};

use super::critic::{action_columns, critic_input, CriticEnsemble, CriticHead};
use super::{NetworkConfig, RebracConfig};

/// `r + (1 - done) * gamma * (next_q_min - beta2 * bc)`.
pub fn rebrac_target(reward: f64, done: f64, gamma: f64, next_q_min: f64, bc: f64, beta2: f64) -> f64 {
    reward + (1.0 - done) * gamma * (next_q_min - beta2 * bc)
}

fn normalizer(q: &[f64]) -> f64 {
    let mean_abs = q.iter().map(|v| v.abs()).sum::<f64>() / q.len() as f64;
    // an all-zero critic carries no Q signal to rescale
    if mean_abs > 0.0 {
        1.0 / mean_abs
    } else {
        1.0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub struct Rebrac {
    pub cfg: RebracConfig,
    pub actor: DeterministicPolicy,
    pub actor_target: ParamSet,
    pub actor_opt: AdamState,
    pub critics: CriticEnsemble,
}

impl Rebrac {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        network: &NetworkConfig,
        head: CriticHead,
        cfg: RebracConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = DeterministicPolicy::init(network.spec(obs_dim, act_dim), rng)?;
        let critics = CriticEnsemble::new(obs_dim, act_dim, network, head, 2, cfg.critic_lr, rng)?;
        Ok(Self {
            actor_target: actor.params.clone(),
            actor_opt: AdamState::for_params(&actor.params, cfg.actor_lr, LrSchedule::Constant),
            actor,
            critics,
            cfg,
        })
    }

    fn obs_dim(&self) -> usize {
        self.actor.spec.input_dim
    }

    /// Target-actor actions with clipped Gaussian smoothing noise.
    pub fn next_actions(&self, next_obs: &Matrix, rng: &mut Rng) -> Result<Matrix> {
        let (mut a, _) = self.actor.actions_with(&self.actor_target, next_obs)?;
        let clip = self.cfg.noise_clip;
        for v in a.as_mut_slice() {
            let noise = (normal(rng) * self.cfg.policy_noise).clamp(-clip, clip);
            *v = (*v + noise).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// TD targets given the policy's next actions.
    pub fn targets_from(&self, batch: &Batch, next_actions: &Matrix) -> Result<Vec<f64>> {
        if batch.next_actions.cols() != self.actor.act_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.actor.act_dim(),
                actual: batch.next_actions.cols(),
                context: "batch next_actions",
            });
        }
        let next_q = self
            .critics
            .target_min(&critic_input(&batch.next_observations, next_actions))?;
        Ok((0..batch.len())
            .map(|i| {
                let bc = sq_dist(next_actions.row(i), batch.next_actions.row(i));
                rebrac_target(batch.rewards[i], batch.dones[i], self.cfg.gamma, next_q[i], bc, self.cfg.beta2)
            })
            .collect())
    }

    /// Critic loss, per-critic gradients and mean online min-Q on dataset actions.
    pub fn critic_loss_and_grads(&self, batch: &Batch, rng: &mut Rng) -> Result<(f64, Vec<ParamSet>, f64)> {
        let next_actions = self.next_actions(&batch.next_observations, rng)?;
        let y = self.targets_from(batch, &next_actions)?;
        let x = critic_input(&batch.observations, &batch.actions);
        let (loss, grads, q) = self.critics.loss_and_grads(&x, &y)?;
        Ok((loss, grads, q.iter().sum::<f64>() / q.len() as f64))
    }

    pub fn critic_step(&mut self, batch: &Batch, rng: &mut Rng) -> Result<(f64, f64)> {
        let (loss, grads, mean_q) = self.critic_loss_and_grads(batch, rng)?;
        self.critics.apply(&grads)?;
        Ok((loss, mean_q))
    }

    /// Q-term scale: `1 / mean|Q_min(s, pi(s))|` with `normalize_q`, else 1.
    pub fn q_scale(&self, batch: &Batch) -> Result<f64> {
        if !self.cfg.normalize_q {
            return Ok(1.0);
        }
        let (actions, _) = self.actor.actions_with(&self.actor.params, &batch.observations)?;
        let q = self
            .critics
            .min_values_with(&self.critics.nets, &critic_input(&batch.observations, &actions))?;
        Ok(normalizer(&q))
    }

    /// Actor loss `mean(beta1 * bc - lambda * Q_min)` and its parameter
    /// gradient, with `lambda` held constant.
    pub fn actor_loss_and_grad(&self, batch: &Batch) -> Result<(f64, ParamSet)> {
        self.actor_loss_and_grad_with(batch, None)
    }

    /// As [`Self::actor_loss_and_grad`] with `lambda` fixed by the caller.
    pub fn actor_loss_and_grad_with(&self, batch: &Batch, lambda: Option<f64>) -> Result<(f64, ParamSet)> {
        let n = batch.len() as f64;
        let (actions, tape) = self.actor.actions_with(&self.actor.params, &batch.observations)?;
        let fwd = self.critics.forward_min(&critic_input(&batch.observations, &actions))?;
        let lambda = match lambda {
            Some(l) => l,
            None if self.cfg.normalize_q => normalizer(&fwd.values),
            None => 1.0,
        };
        let mut loss = 0.0;
        for i in 0..batch.len() {
            let bc = sq_dist(actions.row(i), batch.actions.row(i));
            loss += self.cfg.beta1 * bc - lambda * fwd.values[i];
        }
        loss /= n;

        let d_q = vec![-lambda / n; batch.len()];
        let d_input = self.critics.min_input_grad(&fwd, &d_q)?;
        let mut d_actions = action_columns(&d_input, self.obs_dim());
        for ((d, &a), &b) in d_actions
            .as_mut_slice()
            .iter_mut()
            .zip(actions.as_slice())
            .zip(batch.actions.as_slice())
        {
            *d += 2.0 * self.cfg.beta1 * (a - b) / n;
        }
        let grad = self.actor.backward(&self.actor.params, &tape, &actions, &d_actions)?;
        Ok((loss, grad))
    }

    /// Actor step followed by soft updates of the actor and critic targets.
    pub fn actor_step(&mut self, batch: &Batch) -> Result<f64> {
        let (loss, grad) = self.actor_loss_and_grad(batch)?;
        self.actor_opt.step(&mut self.actor.params, &grad)?;
        soft_update(&mut self.actor_target, &self.actor.params, self.cfg.tau)?;
        self.critics.soft_update_targets(self.cfg.tau)?;
        Ok(loss)
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.is_finite() && self.actor_target.is_finite() && self.critics.is_finite()
    }
}
