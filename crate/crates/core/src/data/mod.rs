//! Offline datasets: validated transition arrays, batch sampling and the CODS
//! v1 file format.

mod cods;

use std::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::neural::Matrix;
use crate::rng::Rng;
use crate::{Error, Result};

pub use cods::{load_dataset, read_header, save_dataset, CodsHeader, MAGIC};

/// Descriptive metadata stored next to the transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Multiplier applied to stored rewards when a dataset is loaded.
    pub reward_scale: f64,
    pub source: String,
    pub random_score: f64,
    pub expert_score: f64,
    /// Set by the loader once `reward_scale` has been applied.
    #[serde(default)]
    pub reward_scale_applied: bool,
}

impl DatasetMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.expert_score > self.random_score) {
            return Err(Error::InvalidDataset(format!(
                "expert score ({}) must exceed random score ({})",
                self.expert_score, self.random_score
            )));
        }
        if !self.reward_scale.is_finite() {
            return Err(Error::InvalidDataset("reward scale must be finite".into()));
        }
        Ok(())
    }
}

/// D4RL-style normalized score: 0 at the random policy, 100 at the expert.
pub fn normalized_score(raw: f64, meta: &DatasetMeta) -> Result<f64> {
    meta.validate()?;
    Ok(100.0 * (raw - meta.random_score) / (meta.expert_score - meta.random_score))
}

/// Immutable offline transitions with episode boundaries.
///
/// Arrays are stored as `f32`, the on-disk precision. `rewards` carries the
/// reward scale; the unscaled values are kept for writing the file back.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    obs_dim: usize,
    act_dim: usize,
    observations: Vec<f32>,
    actions: Vec<f32>,
    raw_rewards: Vec<f32>,
    rewards: Vec<f32>,
    next_observations: Vec<f32>,
    next_actions: Vec<f32>,
    dones: Vec<bool>,
    episode_starts: Vec<usize>,
    reward_scale: f32,
    scale_applied: bool,
}

/// Successor actions: `actions[t + 1]` inside an episode, the step's own
/// action at the final step of each episode.
pub fn build_next_actions(actions: &[f32], act_dim: usize, episode_starts: &[usize]) -> Vec<f32> {
    let n = if act_dim == 0 { 0 } else { actions.len() / act_dim };
    let mut next = actions.to_vec();
    for range in episode_ranges(episode_starts, n) {
        for t in range.start..range.end.saturating_sub(1) {
            next[t * act_dim..(t + 1) * act_dim]
                .copy_from_slice(&actions[(t + 1) * act_dim..(t + 2) * act_dim]);
        }
    }
    next
}

fn episode_ranges(starts: &[usize], n: usize) -> impl Iterator<Item = Range<usize>> + '_ {
    starts.iter().enumerate().map(move |(k, &s)| {
        let end = starts.get(k + 1).copied().unwrap_or(n);
        s..end
    })
}

impl OfflineDataset {
    /// Validates the arrays and derives `next_actions`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        observations: Vec<f32>,
        actions: Vec<f32>,
        rewards: Vec<f32>,
        next_observations: Vec<f32>,
        dones: Vec<bool>,
        episode_starts: Vec<usize>,
    ) -> Result<Self> {
        let next_actions = build_next_actions(&actions, act_dim.max(1), &episode_starts);
        let ds = Self {
            obs_dim,
            act_dim,
            observations,
            actions,
            raw_rewards: rewards.clone(),
            rewards,
            next_observations,
            next_actions,
            dones,
            episode_starts,
            reward_scale: 1.0,
            scale_applied: false,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Applies `scale` to the rewards. Fails if a scale was already applied.
    pub fn with_reward_scale(mut self, scale: f32) -> Result<Self> {
        if self.scale_applied {
            return Err(Error::InvalidDataset("reward scale already applied".into()));
        }
        self.rewards = self.raw_rewards.iter().map(|r| r * scale).collect();
        self.reward_scale = scale;
        self.scale_applied = true;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        let bad = |msg: String| Err(Error::InvalidDataset(msg));
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.obs_dim == 0 || self.act_dim == 0 {
            return bad("observation and action dims must be positive".into());
        }
        if self.observations.len() != n * self.obs_dim
            || self.next_observations.len() != n * self.obs_dim
            || self.actions.len() != n * self.act_dim
            || self.next_actions.len() != n * self.act_dim
            || self.dones.len() != n
            || self.raw_rewards.len() != n
        {
            return bad(format!("array lengths disagree with n = {n}"));
        }
        if self.episode_starts.first() != Some(&0) {
            return bad("episode_starts must begin at 0".into());
        }
        if self.episode_starts.windows(2).any(|w| w[1] <= w[0])
            || *self.episode_starts.last().expect("non-empty") >= n
        {
            return bad("episode_starts must be strictly increasing and < n".into());
        }
        let mut is_end = vec![false; n];
        for range in episode_ranges(&self.episode_starts, n) {
            is_end[range.end - 1] = true;
        }
        if let Some(i) = (0..n).find(|&i| self.dones[i] != is_end[i]) {
            return bad(format!("done flag at index {i} disagrees with episode boundaries"));
        }
        let in_box = |a: &f32| (-1.0..=1.0).contains(a);
        if !self.actions.iter().all(in_box) || !self.next_actions.iter().all(in_box) {
            return bad("actions must lie in [-1, 1]".into());
        }
        let finite = |v: &[f32]| v.iter().all(|x| x.is_finite());
        if !finite(&self.observations) || !finite(&self.next_observations) || !finite(&self.rewards) {
            return bad("non-finite observation or reward".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn observations(&self) -> &[f32] {
        &self.observations
    }

    pub fn actions(&self) -> &[f32] {
        &self.actions
    }

    /// Rewards with the reward scale applied.
    pub fn rewards(&self) -> &[f32] {
        &self.rewards
    }

    /// Rewards as stored on disk.
    pub fn raw_rewards(&self) -> &[f32] {
        &self.raw_rewards
    }

    pub fn reward_scale(&self) -> f32 {
        self.reward_scale
    }

    pub fn next_observations(&self) -> &[f32] {
        &self.next_observations
    }

    pub fn next_actions(&self) -> &[f32] {
        &self.next_actions
    }

    pub fn dones(&self) -> &[bool] {
        &self.dones
    }

    pub fn episode_starts(&self) -> &[usize] {
        &self.episode_starts
    }

    pub fn episode_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        episode_ranges(&self.episode_starts, self.len())
    }

    pub fn observation(&self, i: usize) -> &[f32] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f32] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }

    /// Undiscounted return of every episode.
    pub fn episode_returns(&self) -> Vec<f64> {
        self.episode_ranges()
            .map(|r| r.map(|t| f64::from(self.rewards[t])).sum())
            .collect()
    }

    /// Gathers the transitions at `indices` as `f64` matrices.
    pub fn gather(&self, indices: &[usize]) -> Batch {
        let rows = |src: &[f32], dim: usize| {
            let mut data = Vec::with_capacity(indices.len() * dim);
            for &i in indices {
                data.extend(src[i * dim..(i + 1) * dim].iter().map(|&x| f64::from(x)));
            }
            Matrix::from_vec(indices.len(), dim, data)
        };
        Batch {
            observations: rows(&self.observations, self.obs_dim),
            actions: rows(&self.actions, self.act_dim),
            rewards: indices.iter().map(|&i| f64::from(self.rewards[i])).collect(),
            next_observations: rows(&self.next_observations, self.obs_dim),
            next_actions: rows(&self.next_actions, self.act_dim),
            dones: indices.iter().map(|&i| if self.dones[i] { 1.0 } else { 0.0 }).collect(),
            indices: indices.to_vec(),
        }
    }
}

/// Aligned minibatch of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub observations: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_observations: Matrix,
    pub next_actions: Matrix,
    pub dones: Vec<f64>,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Uniform sampling with replacement.
pub fn sample_batch(dataset: &OfflineDataset, batch_size: usize, rng: &mut Rng) -> Result<Batch> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let n = dataset.len();
    let indices: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
    Ok(dataset.gather(&indices))
}

/// Accumulates whole episodes into an [`OfflineDataset`].
#[derive(Debug, Default, Clone)]
pub struct DatasetBuilder {
    obs_dim: usize,
    act_dim: usize,
    observations: Vec<f32>,
    actions: Vec<f32>,
    rewards: Vec<f32>,
    next_observations: Vec<f32>,
    dones: Vec<bool>,
    episode_starts: Vec<usize>,
}

impl DatasetBuilder {
    pub fn new(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            ..Self::default()
        }
    }

    pub fn start_episode(&mut self) {
        self.episode_starts.push(self.rewards.len());
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], done: bool) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(action.len(), self.act_dim);
        self.observations.extend(obs.iter().map(|&x| x as f32));
        self.actions.extend(action.iter().map(|&x| x as f32));
        self.rewards.push(reward as f32);
        self.next_observations.extend(next_obs.iter().map(|&x| x as f32));
        self.dones.push(done);
    }

    pub fn build(self) -> Result<OfflineDataset> {
        OfflineDataset::new(
            self.obs_dim,
            self.act_dim,
            self.observations,
            self.actions,
            self.rewards,
            self.next_observations,
            self.dones,
            self.episode_starts,
        )
    }
}
