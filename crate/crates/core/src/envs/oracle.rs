use super::{rollout, Env, EnvState, Policy};
use crate::{Error, Result};

/// Hard cap on `horizon * states * actions` table entries.
const MAX_TABLE: usize = 50_000_000;

/// Exact finite-horizon Q table of an environment restricted to a grid.
///
/// States are snapped to the nearest grid point per dimension; actions range
/// over the product grid of `action_res` points per dimension in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    axes: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    horizon: usize,
    gamma: f64,
    n_states: usize,
    /// `q[(t * n_states + s) * n_actions + a]`
    q: Vec<f64>,
    pub tol: f64,
    pub residual: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

/// Backward induction over the discretized task.
pub fn tabular_oracle(env: &dyn Env, gamma: f64, state_res: usize, action_res: usize, tol: f64) -> Result<OracleGrid> {
    if state_res < 2 || action_res < 2 {
        return Err(Error::InvalidArgument("grid resolutions must be at least 2".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let axes: Vec<Vec<f64>> = env
        .state_bounds()
        .into_iter()
        .map(|(lo, hi)| linspace(lo, hi, state_res))
        .collect();
    let actions = product(&vec![linspace(-1.0, 1.0, action_res); env.act_dim()]);
    let n_states = state_res.pow(axes.len() as u32);
    let n_actions = actions.len();
    let horizon = env.horizon();
    if horizon.saturating_mul(n_states).saturating_mul(n_actions) > MAX_TABLE {
        return Err(Error::InvalidArgument("oracle grid too large".into()));
    }
    let mut grid = OracleGrid {
        axes,
        actions,
        horizon,
        gamma,
        n_states,
        q: vec![0.0; horizon * n_states * n_actions],
        tol,
        residual: 0.0,
    };

    // transitions do not depend on t apart from the done flag
    let mut next = vec![0usize; n_states * n_actions];
    let mut reward = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        let obs = grid.state_point(s);
        for (a, action) in grid.actions.iter().enumerate() {
            let step = env.step(&EnvState { obs: obs.clone(), t: 0 }, action)?;
            next[s * n_actions + a] = grid.snap(&step.next.obs);
            reward[s * n_actions + a] = step.reward;
        }
    }

    let backup = |q: &[f64], t: usize, i: usize| -> f64 {
        if t + 1 == horizon {
            return reward[i];
        }
        let base = ((t + 1) * n_states + next[i]) * n_actions;
        let best = q[base..base + n_actions]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        reward[i] + gamma * best
    };
    for t in (0..horizon).rev() {
        for i in 0..n_states * n_actions {
            let v = backup(&grid.q, t, i);
            grid.q[t * n_states * n_actions + i] = v;
        }
    }
    let mut residual: f64 = 0.0;
    for t in 0..horizon {
        for i in 0..n_states * n_actions {
            residual = residual.max((grid.q[t * n_states * n_actions + i] - backup(&grid.q, t, i)).abs());
        }
    }
    grid.residual = residual;
    if residual > tol {
        return Err(Error::InvalidArgument(format!(
            "oracle residual {residual} exceeds tolerance {tol}"
        )));
    }
    Ok(grid)
}

impl OracleGrid {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Grid point for flat state index `s` (first dimension varies slowest).
    pub fn state_point(&self, mut s: usize) -> Vec<f64> {
        let mut point = vec![0.0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            point[d] = axis[s % axis.len()];
            s /= axis.len();
        }
        point
    }

    /// Flat index of the nearest grid point.
    pub fn snap(&self, obs: &[f64]) -> usize {
        let mut idx = 0;
        for (axis, &x) in self.axes.iter().zip(obs) {
            let n = axis.len();
            let (lo, hi) = (axis[0], axis[n - 1]);
            let pos = ((x - lo) / (hi - lo) * (n - 1) as f64).round();
            idx = idx * n + pos.clamp(0.0, (n - 1) as f64) as usize;
        }
        idx
    }

    pub fn q(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q[(t * self.n_states + s) * self.actions.len() + a]
    }

    pub fn q_row(&self, t: usize, s: usize) -> &[f64] {
        let n_a = self.actions.len();
        let base = (t * self.n_states + s) * n_a;
        &self.q[base..base + n_a]
    }

    /// Index of the first maximizing action at `(t, snap(obs))`.
    pub fn greedy_index(&self, obs: &[f64], t: usize) -> usize {
        let row = self.q_row(t.min(self.horizon - 1), self.snap(obs));
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Undiscounted return of the greedy policy from `start` in the
    /// continuous environment.
    pub fn greedy_return(&self, env: &dyn Env, start: &[f64]) -> Result<f64> {
        rollout(env, &OracleGreedyPolicy { grid: self }, EnvState { obs: start.to_vec(), t: 0 })
    }
}

pub struct OracleGreedyPolicy<'a> {
    pub grid: &'a OracleGrid,
}

impl Policy for OracleGreedyPolicy<'_> {
    fn act(&self, obs: &[f64], t: usize) -> Result<Vec<f64>> {
        Ok(self.grid.actions[self.grid.greedy_index(obs, t)].clone())
    }
}
