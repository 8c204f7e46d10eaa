//! Deterministic toy control tasks, scripted behavior policies and exact
//! oracles used to check learned value functions.
//!
//! Rewards are a function of the state *before* the transition, and episodes
//! end only at the horizon (recorded as `done = true`).

mod behavior;
mod chain;
mod oracle;
mod pointmass;
mod tabular;

use serde::{Deserialize, Serialize};

use crate::rng::{uniform, Rng};
use crate::{Error, Result};

pub use behavior::{
    expert_return, generate_dataset, random_policy_return, Behavior, ControllerPolicy, META_EPISODES,
};
pub use chain::Chain1D;
pub use oracle::{tabular_oracle, OracleGreedyPolicy, OracleGrid};
pub use pointmass::PointMass2D;
pub use tabular::TabularMdp;

/// Observation plus elapsed steps; the step counter only drives the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub obs: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next: EnvState,
    pub reward: f64,
    pub done: bool,
}

/// Initial-state distribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartDist {
    /// Uniform over the state box.
    #[default]
    Uniform,
    Fixed(Vec<f64>),
}

pub trait Env: Send + Sync {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Per-dimension `(low, high)` bounds of the observation box.
    fn state_bounds(&self) -> Vec<(f64, f64)>;
    fn start_dist(&self) -> &StartDist;

    /// Deterministic transition; errors on actions outside `[-1, 1]`.
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<Step>;

    /// Unclipped PD controller toward the task goal.
    fn pd_action(&self, obs: &[f64], kp: f64, kd: f64) -> Vec<f64>;

    fn reset(&self, rng: &mut Rng) -> EnvState {
        let obs = match self.start_dist() {
            StartDist::Uniform => self
                .state_bounds()
                .into_iter()
                .map(|(lo, hi)| uniform(rng, lo, hi))
                .collect(),
            StartDist::Fixed(s) => s.clone(),
        };
        EnvState { obs, t: 0 }
    }
}

/// Maps observations (and the step index) to actions.
pub trait Policy {
    fn act(&self, obs: &[f64], t: usize) -> Result<Vec<f64>>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, obs: &[f64], t: usize) -> Result<Vec<f64>> {
        (**self).act(obs, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pointmass,
    Chain,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvKind::Pointmass => Box::new(PointMass2D::default()),
            EnvKind::Chain => Box::new(Chain1D::default()),
        }
    }

    pub fn make_with_start(self, start: StartDist) -> Box<dyn Env> {
        match self {
            EnvKind::Pointmass => Box::new(PointMass2D {
                start,
                ..PointMass2D::default()
            }),
            EnvKind::Chain => Box::new(Chain1D {
                start,
                ..Chain1D::default()
            }),
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointmass" => Ok(EnvKind::Pointmass),
            "chain" => Ok(EnvKind::Chain),
            other => Err(Error::InvalidArgument(format!(
                "unknown env {other:?} (expected pointmass or chain)"
            ))),
        }
    }
}

pub(crate) fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: action.len(),
            context: "action",
        });
    }
    if let Some(a) = action.iter().find(|a| !(-1.0..=1.0).contains(*a)) {
        return Err(Error::ActionOutOfBounds(format!("{a} not in [-1, 1]")));
    }
    Ok(())
}

pub(crate) fn clip_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Undiscounted return of one episode from `start`.
pub fn rollout(env: &dyn Env, policy: &dyn Policy, start: EnvState) -> Result<f64> {
    let mut state = start;
    let mut ret = 0.0;
    loop {
        let action = policy.act(&state.obs, state.t)?;
        let step = env.step(&state, &action)?;
        ret += step.reward;
        if step.done {
            return Ok(ret);
        }
        state = step.next;
    }
}
