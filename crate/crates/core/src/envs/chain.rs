use super::{check_action, Env, EnvState, StartDist, Step};
use crate::Result;

/// One-dimensional walk with a sparse reward band around `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain1D {
    pub step_size: f64,
    pub target: f64,
    pub band: f64,
    pub horizon: usize,
    pub start: StartDist,
}

impl Default for Chain1D {
    fn default() -> Self {
        Self {
            step_size: 0.2,
            target: 0.8,
            band: 0.1,
            horizon: 20,
            start: StartDist::Uniform,
        }
    }
}

impl Chain1D {
    pub fn reward(&self, s: f64) -> f64 {
        if (s - self.target).abs() < self.band {
            1.0
        } else {
            0.0
        }
    }
}

impl Env for Chain1D {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }

    fn start_dist(&self) -> &StartDist {
        &self.start
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<Step> {
        check_action(action, 1)?;
        let s = state.obs[0];
        let t = state.t + 1;
        Ok(Step {
            next: EnvState {
                obs: vec![(s + self.step_size * action[0]).clamp(-1.0, 1.0)],
                t,
            },
            reward: self.reward(s),
            done: t >= self.horizon,
        })
    }

    fn pd_action(&self, obs: &[f64], kp: f64, _kd: f64) -> Vec<f64> {
        vec![kp * (self.target - obs[0])]
    }
}
