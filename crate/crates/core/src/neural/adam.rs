use serde::{Deserialize, Serialize};

use super::mlp::ParamSet;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    CosineDecay { total_steps: u64 },
}

impl LrSchedule {
    /// Learning rate used by the update with zero-based index `step`.
    pub fn lr(&self, base_lr: f64, step: u64) -> f64 {
        match *self {
            LrSchedule::Constant => base_lr,
            LrSchedule::CosineDecay { total_steps } => {
                let frac = if total_steps == 0 {
                    1.0
                } else {
                    (step.min(total_steps) as f64) / total_steps as f64
                };
                base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Adam moments for one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    base_lr: f64,
    schedule: LrSchedule,
}

impl AdamState {
    pub fn new(n_params: usize, base_lr: f64, schedule: LrSchedule) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            base_lr,
            schedule,
        }
    }

    pub fn for_params(params: &ParamSet, base_lr: f64, schedule: LrSchedule) -> Self {
        Self::new(params.n_params(), base_lr, schedule)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    pub fn schedule(&self) -> LrSchedule {
        self.schedule
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Learning rate the next update will use.
    pub fn current_lr(&self) -> f64 {
        self.schedule.lr(self.base_lr, self.step)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                actual: grads.len(),
                context: "adam gradient",
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradients"));
        }
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        self.update(params.as_mut_slice(), grads.as_slice())
    }
}
