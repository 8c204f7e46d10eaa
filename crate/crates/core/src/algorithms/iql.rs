//! Implicit Q-learning: expectile value regression, in-sample Q targets and
//! advantage-weighted policy extraction.

use crate::actors::{GaussianPolicy, Squash};
use crate::data::Batch;
use crate::neural::{AdamState, LrSchedule, Matrix, MlpSpec, Mode, ParamSet};
use crate::rng::Rng;
use crate::Result;

use super::critic::{critic_input, CriticEnsemble, CriticHead};
use super::{IqlConfig, NetworkConfig};

/// Asymmetric squared loss: weight `expectile` on positive residuals.
pub fn expectile_loss(diff: f64, expectile: f64) -> f64 {
    expectile_weight(diff, expectile) * diff * diff
}

fn expectile_weight(diff: f64, expectile: f64) -> f64 {
    if diff > 0.0 {
        expectile
    } else {
        1.0 - expectile
    }
}

/// `clip(exp(beta * advantage), -clip, clip)`.
pub fn awr_weight(advantage: f64, inv_temperature: f64, clip: f64) -> f64 {
    (advantage * inv_temperature).exp().clamp(-clip, clip)
}

#[derive(Debug, Clone)]
pub struct Iql {
    pub cfg: IqlConfig,
    pub actor: GaussianPolicy,
    pub actor_opt: AdamState,
    /// State-value network; always a scalar head.
    pub value_spec: MlpSpec,
    pub value: ParamSet,
    pub value_opt: AdamState,
    pub critics: CriticEnsemble,
}

impl Iql {
    /// `decay_steps` is the cosine horizon used when the config leaves it unset.
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        network: &NetworkConfig,
        head: CriticHead,
        cfg: IqlConfig,
        decay_steps: u64,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor = GaussianPolicy::init(
            obs_dim,
            act_dim,
            (network.hidden_dim, network.n_hidden_layers),
            Squash::ClippedIdentity,
            cfg.dropout_rate,
            rng,
        )?;
        let value_spec = network.spec(obs_dim, 1).with_dropout(cfg.dropout_rate);
        let value = value_spec.init(rng)?;
        let critics = CriticEnsemble::new(obs_dim, act_dim, network, head, 2, cfg.critic_lr, rng)?;
        let total_steps = cfg.lr_decay_steps.unwrap_or(decay_steps).max(1);
        Ok(Self {
            actor_opt: AdamState::for_params(&actor.params, cfg.actor_lr, LrSchedule::CosineDecay { total_steps }),
            actor,
            value_opt: AdamState::for_params(&value, cfg.value_lr, LrSchedule::Constant),
            value_spec,
            value,
            critics,
            cfg,
        })
    }

    pub fn values(&self, obs: &Matrix) -> Result<Vec<f64>> {
        Ok(self.value_spec.forward_batch(&self.value, obs, Mode::Eval)?.0.into_vec())
    }

    fn target_q(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.critics
            .target_min(&critic_input(&batch.observations, &batch.actions))
    }

    /// Expectile regression of V(s) toward the target-critic min on dataset actions.
    pub fn value_loss_and_grad(&self, batch: &Batch, rng: &mut Rng) -> Result<(f64, ParamSet)> {
        let q = self.target_q(batch)?;
        let (v, tape) = self
            .value_spec
            .forward_batch(&self.value, &batch.observations, Mode::Train(rng))?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut d_v = Matrix::zeros(batch.len(), 1);
        for (i, (&qi, &vi)) in q.iter().zip(v.as_slice()).enumerate() {
            let diff = qi - vi;
            let w = expectile_weight(diff, self.cfg.expectile);
            loss += w * diff * diff;
            d_v.as_mut_slice()[i] = -2.0 * w * diff / n;
        }
        let grad = self.value_spec.backward_batch(&self.value, &tape, &d_v)?.0;
        Ok((loss / n, grad))
    }

    pub fn value_step(&mut self, batch: &Batch, rng: &mut Rng) -> Result<f64> {
        let (loss, grad) = self.value_loss_and_grad(batch, rng)?;
        self.value_opt.step(&mut self.value, &grad)?;
        Ok(loss)
    }

    /// `r + (1 - done) * gamma * V(s')`.
    pub fn q_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let next_v = self.values(&batch.next_observations)?;
        Ok((0..batch.len())
            .map(|i| batch.rewards[i] + (1.0 - batch.dones[i]) * self.cfg.gamma * next_v[i])
            .collect())
    }

    pub fn q_loss_and_grads(&self, batch: &Batch) -> Result<(f64, Vec<ParamSet>, f64)> {
        let y = self.q_targets(batch)?;
        let x = critic_input(&batch.observations, &batch.actions);
        let (loss, grads, q) = self.critics.loss_and_grads(&x, &y)?;
        Ok((loss, grads, q.iter().sum::<f64>() / q.len() as f64))
    }

    /// Critic step followed by the soft target update.
    pub fn q_step(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let (loss, grads, mean_q) = self.q_loss_and_grads(batch)?;
        self.critics.apply(&grads)?;
        self.critics.soft_update_targets(self.cfg.tau)?;
        Ok((loss, mean_q))
    }

    /// Per-sample advantage weights from the target critics and current V.
    pub fn advantage_weights(&self, batch: &Batch) -> Result<Vec<f64>> {
        let q = self.target_q(batch)?;
        let v = self.values(&batch.observations)?;
        Ok(q.iter()
            .zip(&v)
            .map(|(q, v)| awr_weight(q - v, self.cfg.inv_temperature, self.cfg.adv_clip))
            .collect())
    }

    /// `-mean(w * log pi(a|s))` for given weights.
    pub fn weighted_bc_loss_and_grad(&self, batch: &Batch, weights: &[f64], rng: &mut Rng) -> Result<(f64, ParamSet)> {
        let tape = self.actor.log_prob_batch(
            &self.actor.params,
            &batch.observations,
            &batch.actions,
            Mode::Train(rng),
        )?;
        let n = batch.len() as f64;
        let loss = -weights.iter().zip(&tape.log_probs).map(|(w, l)| w * l).sum::<f64>() / n;
        let d_lp: Vec<f64> = weights.iter().map(|w| -w / n).collect();
        let grad = self.actor.log_prob_backward(&self.actor.params, &tape, &d_lp)?;
        Ok((loss, grad))
    }

    pub fn actor_loss_and_grad(&self, batch: &Batch, rng: &mut Rng) -> Result<(f64, ParamSet)> {
        let weights = self.advantage_weights(batch)?;
        self.weighted_bc_loss_and_grad(batch, &weights, rng)
    }

    pub fn actor_step(&mut self, batch: &Batch, rng: &mut Rng) -> Result<f64> {
        let (loss, grad) = self.actor_loss_and_grad(batch, rng)?;
        self.actor_opt.step(&mut self.actor.params, &grad)?;
        Ok(loss)
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.is_finite() && self.value.is_finite() && self.critics.is_finite()
    }
}
