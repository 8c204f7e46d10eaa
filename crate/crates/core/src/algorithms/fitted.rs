//! Fitted Q iteration on a tabular MDP with one-hot `(s, a)` features.
//!
//! The critic is a single affine layer, so each state-action pair owns its
//! own output row and the only approximation left is the head's loss.

use crate::envs::TabularMdp;
use crate::neural::{AdamState, LrSchedule, Matrix, MlpSpec, Mode, ParamSet};
use crate::rng::Rng;
use crate::{Error, Result};

use super::critic::CriticHead;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedTdConfig {
    pub gamma: f64,
    pub outer_iterations: usize,
    /// Adam steps per regression round, under a cosine schedule.
    pub inner_steps: u64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct FittedTd {
    pub spec: MlpSpec,
    pub head: CriticHead,
    pub params: ParamSet,
    inputs: Matrix,
}

impl FittedTd {
    pub fn new(mdp: &TabularMdp, head: CriticHead, rng: &mut Rng) -> Result<Self> {
        let pairs = mdp.n_pairs();
        let spec = MlpSpec::new(pairs, 0, 0, head.output_dim());
        let params = spec.init(rng)?;
        let mut inputs = Matrix::zeros(pairs, pairs);
        for i in 0..pairs {
            inputs[(i, i)] = 1.0;
        }
        Ok(Self {
            spec,
            head,
            params,
            inputs,
        })
    }

    /// Current scalar Q for every pair, indexed `s * n_actions + a`.
    pub fn q_values(&self) -> Result<Vec<f64>> {
        let (out, _) = self.spec.forward_batch(&self.params, &self.inputs, Mode::Eval)?;
        Ok(self.head.values(&out))
    }

    /// Regresses the network onto fixed targets; returns the final loss.
    pub fn fit(&mut self, targets: &[f64], steps: u64, lr: f64) -> Result<f64> {
        let mut opt = AdamState::for_params(&self.params, lr, LrSchedule::CosineDecay { total_steps: steps.max(1) });
        let mut loss = f64::NAN;
        for _ in 0..steps {
            let (out, tape) = self.spec.forward_batch(&self.params, &self.inputs, Mode::Eval)?;
            let (l, d_out) = self.head.loss_and_grad(&out, targets);
            let (grad, _) = self.spec.backward_batch(&self.params, &tape, &d_out)?;
            opt.step(&mut self.params, &grad)?;
            loss = l;
        }
        Ok(loss)
    }

    pub fn run(&mut self, mdp: &TabularMdp, cfg: &FittedTdConfig) -> Result<Vec<f64>> {
        if !(cfg.gamma >= 0.0 && cfg.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {}", cfg.gamma)));
        }
        for _ in 0..cfg.outer_iterations {
            let targets = mdp.backup(&self.q_values()?, cfg.gamma);
            self.fit(&targets, cfg.inner_steps, cfg.lr)?;
        }
        self.q_values()
    }
}
