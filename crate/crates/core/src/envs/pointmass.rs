use super::{check_action, Env, EnvState, StartDist, Step};
use crate::Result;

/// Point mass on `[-1, 1]^2` with capped velocity, rewarded by negative
/// distance to a fixed goal.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass2D {
    pub dt: f64,
    pub v_cap: f64,
    pub goal: [f64; 2],
    pub horizon: usize,
    pub start: StartDist,
}

impl Default for PointMass2D {
    fn default() -> Self {
        Self {
            dt: 0.1,
            v_cap: 0.5,
            goal: [0.5, 0.5],
            horizon: 50,
            start: StartDist::Uniform,
        }
    }
}

impl PointMass2D {
    pub fn reward(&self, obs: &[f64]) -> f64 {
        -((obs[0] - self.goal[0]).powi(2) + (obs[1] - self.goal[1]).powi(2)).sqrt()
    }
}

impl Env for PointMass2D {
    fn name(&self) -> &'static str {
        "pointmass"
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0), (-1.0, 1.0), (-self.v_cap, self.v_cap), (-self.v_cap, self.v_cap)]
    }

    fn start_dist(&self) -> &StartDist {
        &self.start
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<Step> {
        check_action(action, 2)?;
        let s = &state.obs;
        let reward = self.reward(s);
        let mut next = vec![0.0; 4];
        for d in 0..2 {
            next[d] = (s[d] + self.dt * s[d + 2]).clamp(-1.0, 1.0);
            next[d + 2] = (s[d + 2] + self.dt * action[d]).clamp(-self.v_cap, self.v_cap);
        }
        let t = state.t + 1;
        Ok(Step {
            next: EnvState { obs: next, t },
            reward,
            done: t >= self.horizon,
        })
    }

    fn pd_action(&self, obs: &[f64], kp: f64, kd: f64) -> Vec<f64> {
        (0..2)
            .map(|d| kp * (self.goal[d] - obs[d]) - kd * obs[d + 2])
            .collect()
    }
}
