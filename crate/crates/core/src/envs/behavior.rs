use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{clip_unit, rollout, Env, Policy};
use crate::data::{DatasetBuilder, DatasetMeta, OfflineDataset};
use crate::rng::{normal, stream, Rng};
use crate::{Error, Result};

/// Episodes used to estimate the random and expert reference returns.
pub const META_EPISODES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Random,
    Mediocre,
    Expert,
}

impl Behavior {
    /// PD gains `(kp, kd)`; `None` for the uniform random policy.
    pub fn gains(self) -> Option<(f64, f64)> {
        match self {
            Behavior::Random => None,
            Behavior::Mediocre => Some((0.5, 0.3)),
            Behavior::Expert => Some((2.0, 1.0)),
        }
    }

    fn sample(self, env: &dyn Env, obs: &[f64], noise_std: f64, rng: &mut Rng) -> Vec<f64> {
        match self.gains() {
            None => (0..env.act_dim())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect(),
            Some((kp, kd)) => env
                .pd_action(obs, kp, kd)
                .into_iter()
                .map(|a| {
                    let noise = if noise_std > 0.0 { noise_std * normal(rng) } else { 0.0 };
                    clip_unit(a + noise)
                })
                .collect(),
        }
    }
}

impl std::str::FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Behavior::Random),
            "mediocre" => Ok(Behavior::Mediocre),
            "expert" => Ok(Behavior::Expert),
            other => Err(Error::InvalidArgument(format!("unknown behavior {other:?}"))),
        }
    }
}

impl std::fmt::Display for Behavior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Behavior::Random => "random",
            Behavior::Mediocre => "mediocre",
            Behavior::Expert => "expert",
        };
        f.write_str(s)
    }
}

/// Noiseless clipped PD controller.
pub struct ControllerPolicy<'a> {
    pub env: &'a dyn Env,
    pub kp: f64,
    pub kd: f64,
}

impl Policy for ControllerPolicy<'_> {
    fn act(&self, obs: &[f64], _t: usize) -> Result<Vec<f64>> {
        Ok(self.env.pd_action(obs, self.kp, self.kd).into_iter().map(clip_unit).collect())
    }
}

/// Mean undiscounted return of the uniform random policy.
pub fn random_policy_return(env: &dyn Env, episodes: usize, rng: &mut Rng) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        loop {
            let action = Behavior::Random.sample(env, &state.obs, 0.0, rng);
            let step = env.step(&state, &action)?;
            total += step.reward;
            if step.done {
                break;
            }
            state = step.next;
        }
    }
    Ok(total / episodes as f64)
}

/// Mean undiscounted return of the noiseless expert controller.
pub fn expert_return(env: &dyn Env, episodes: usize, rng: &mut Rng) -> Result<f64> {
    let (kp, kd) = Behavior::Expert.gains().expect("expert has gains");
    let policy = ControllerPolicy { env, kp, kd };
    let mut total = 0.0;
    for _ in 0..episodes {
        let start = env.reset(rng);
        total += rollout(env, &policy, start)?;
    }
    Ok(total / episodes as f64)
}

/// Rolls out `behavior` for `n_episodes` and records the transitions.
///
/// The reference scores in the returned meta come from [`META_EPISODES`]
/// Monte-Carlo episodes of the random policy and the noiseless expert.
pub fn generate_dataset(
    env: &dyn Env,
    behavior: Behavior,
    n_episodes: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(OfflineDataset, DatasetMeta)> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut rng = stream(seed, 0);
    let mut builder = DatasetBuilder::new(env.obs_dim(), env.act_dim());
    for _ in 0..n_episodes {
        builder.start_episode();
        let mut state = env.reset(&mut rng);
        loop {
            let action = behavior.sample(env, &state.obs, noise_std, &mut rng);
            let step = env.step(&state, &action)?;
            builder.push(&state.obs, &action, step.reward, &step.next.obs, step.done);
            if step.done {
                break;
            }
            state = step.next;
        }
    }
    let dataset = builder.build()?;
    let random_score = random_policy_return(env, META_EPISODES, &mut stream(seed, 1))?;
    let expert_score = expert_return(env, META_EPISODES, &mut stream(seed, 2))?;
    let meta = DatasetMeta {
        reward_scale: 1.0,
        source: format!(
            "{}/{behavior}/episodes={n_episodes}/noise={noise_std}/seed={seed}",
            env.name()
        ),
        random_score,
        expert_score,
        reward_scale_applied: false,
    };
    Ok((dataset, meta))
}
