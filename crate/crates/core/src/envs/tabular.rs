use rand::Rng as _;

use crate::rng::seeded;
use crate::{Error, Result};

/// Small deterministic MDP with an exact value-iteration solution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `next[s * n_actions + a]`
    pub next: Vec<usize>,
    /// `reward[s * n_actions + a]`, in `[0, 1)`
    pub reward: Vec<f64>,
}

impl TabularMdp {
    pub fn random(n_states: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let pairs = n_states * n_actions;
        Self {
            n_states,
            n_actions,
            next: (0..pairs).map(|_| rng.random_range(0..n_states)).collect(),
            reward: (0..pairs).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Bellman optimality backup of a Q table.
    pub fn backup(&self, q: &[f64], gamma: f64) -> Vec<f64> {
        (0..self.n_pairs())
            .map(|i| {
                let s2 = self.next[i];
                let best = q[s2 * self.n_actions..(s2 + 1) * self.n_actions]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                self.reward[i] + gamma * best
            })
            .collect()
    }

    /// Optimal Q by value iteration until the sup-norm change is below `tol`.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        let mut q = vec![0.0; self.n_pairs()];
        for _ in 0..100_000 {
            let next = self.backup(&q, gamma);
            let delta = next
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            q = next;
            if delta < tol {
                return Ok(q);
            }
        }
        Err(Error::InvalidArgument("value iteration did not converge".into()))
    }

    /// Bounds on any discounted return: `[min r, max r] / (1 - gamma)`.
    pub fn return_bounds(&self, gamma: f64) -> (f64, f64) {
        let lo = self.reward.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.reward.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo / (1.0 - gamma), hi / (1.0 - gamma))
    }
}
