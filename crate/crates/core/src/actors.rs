//! Policy heads.
//!
//! [`DeterministicPolicy`] squashes a network output through `tanh`.
//! [`GaussianPolicy`] emits a per-dimension mean and clamped log-std and
//! either squashes samples through `tanh` (with the change-of-variables
//! correction) or evaluates an unsquashed normal at actions clipped just
//! inside the unit box.

use serde::{Deserialize, Serialize};

use crate::envs::Policy;
use crate::neural::{Matrix, MlpSpec, Mode, ParamSet, Tape};
use crate::rng::{normal, Rng};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps log-densities finite at the edges of the action box.
pub const ACTION_EPS: f64 = 1e-6;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

fn check_obs(spec: &MlpSpec, obs: &Matrix) -> Result<()> {
    if obs.cols() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: obs.cols(),
            context: "policy observation",
        });
    }
    Ok(())
}

/// `tanh(MLP(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPolicy {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl DeterministicPolicy {
    pub fn init(spec: MlpSpec, rng: &mut Rng) -> Result<Self> {
        let params = spec.init(rng)?;
        Ok(Self { spec, params })
    }

    pub fn act_dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let (a, _) = self.actions_with(&self.params, &Matrix::row_vector(state))?;
        Ok(a.into_vec())
    }

    /// Batched actions under `params` (online or target).
    pub fn actions_with(&self, params: &ParamSet, obs: &Matrix) -> Result<(Matrix, Tape)> {
        check_obs(&self.spec, obs)?;
        let (mut out, tape) = self.spec.forward_batch(params, obs, Mode::Eval)?;
        out.map_inplace(f64::tanh);
        Ok((out, tape))
    }

    /// Parameter gradients given dL/d(action) for actions from [`Self::actions_with`].
    pub fn backward(&self, params: &ParamSet, tape: &Tape, actions: &Matrix, d_actions: &Matrix) -> Result<ParamSet> {
        let mut d_pre = d_actions.clone();
        for (d, &a) in d_pre.as_mut_slice().iter_mut().zip(actions.as_slice()) {
            *d *= 1.0 - a * a;
        }
        Ok(self.spec.backward_batch(params, tape, &d_pre)?.0)
    }
}

impl Policy for DeterministicPolicy {
    fn act(&self, obs: &[f64], _t: usize) -> Result<Vec<f64>> {
        self.action(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    Tanh,
    ClippedIdentity,
}

/// Mean and clamped log-std for a batch, with what backprop needs.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mean: Matrix,
    pub log_std: Matrix,
    clamped: Vec<bool>,
    tape: Tape,
}

/// Reparameterized samples `u = mean + std * eps` and their log-densities.
#[derive(Debug, Clone)]
pub struct SampleTape {
    pub actions: Matrix,
    pub log_probs: Vec<f64>,
    head: GaussianHead,
    eps: Matrix,
    pre: Matrix,
}

#[derive(Debug, Clone)]
pub struct LogProbTape {
    pub log_probs: Vec<f64>,
    head: GaussianHead,
    /// Points at which the normal density was evaluated.
    points: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub spec: MlpSpec,
    pub params: ParamSet,
    pub squash: Squash,
}

fn normal_logpdf(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LOG_2PI
}

impl GaussianPolicy {
    /// The network must output `2 * act_dim` values: means, then log-stds.
    pub fn new(spec: MlpSpec, params: ParamSet, squash: Squash) -> Result<Self> {
        if spec.output_dim % 2 != 0 {
            return Err(Error::InvalidArgument(
                "gaussian policy needs an even output dim".into(),
            ));
        }
        Ok(Self { spec, params, squash })
    }

    pub fn init(obs_dim: usize, act_dim: usize, hidden: (usize, usize), squash: Squash, dropout: f64, rng: &mut Rng) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden.0, hidden.1, 2 * act_dim).with_dropout(dropout);
        let params = spec.init(rng)?;
        Self::new(spec, params, squash)
    }

    pub fn act_dim(&self) -> usize {
        self.spec.output_dim / 2
    }

    pub fn head(&self, params: &ParamSet, obs: &Matrix, mode: Mode<'_>) -> Result<GaussianHead> {
        check_obs(&self.spec, obs)?;
        let d = self.act_dim();
        let (out, tape) = self.spec.forward_batch(params, obs, mode)?;
        let mean = out.columns(0, d);
        let mut log_std = out.columns(d, 2 * d);
        let clamped = log_std
            .as_slice()
            .iter()
            .map(|&l| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&l))
            .collect();
        log_std.map_inplace(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Ok(GaussianHead {
            mean,
            log_std,
            clamped,
            tape,
        })
    }

    fn head_backward(&self, params: &ParamSet, head: &GaussianHead, d_mean: &Matrix, d_log_std: &Matrix) -> Result<ParamSet> {
        let mut d_log_std = d_log_std.clone();
        for (g, &c) in d_log_std.as_mut_slice().iter_mut().zip(&head.clamped) {
            if c {
                *g = 0.0;
            }
        }
        let upstream = d_mean.hconcat(&d_log_std);
        Ok(self.spec.backward_batch(params, &head.tape, &upstream)?.0)
    }

    /// Deterministic evaluation action: `tanh(mean)` or `clip(mean)`.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let head = self.head(&self.params, &Matrix::row_vector(state), Mode::Eval)?;
        Ok(head
            .mean
            .as_slice()
            .iter()
            .map(|&m| match self.squash {
                Squash::Tanh => m.tanh(),
                Squash::ClippedIdentity => m.clamp(-1.0, 1.0),
            })
            .collect())
    }

    pub fn sample_and_log_prob(&self, state: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let tape = self.sample_batch(&self.params, &Matrix::row_vector(state), rng, Mode::Eval)?;
        Ok((tape.actions.into_vec(), tape.log_probs[0]))
    }

    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.act_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.act_dim(),
                actual: action.len(),
                context: "policy action",
            });
        }
        let tape = self.log_prob_batch(
            &self.params,
            &Matrix::row_vector(state),
            &Matrix::row_vector(action),
            Mode::Eval,
        )?;
        Ok(tape.log_probs[0])
    }

    pub fn sample_batch(&self, params: &ParamSet, obs: &Matrix, rng: &mut Rng, mode: Mode<'_>) -> Result<SampleTape> {
        let head = self.head(params, obs, mode)?;
        let (rows, d) = (obs.rows(), self.act_dim());
        let mut eps = Matrix::zeros(rows, d);
        for e in eps.as_mut_slice() {
            *e = normal(rng);
        }
        let mut pre = Matrix::zeros(rows, d);
        let mut actions = Matrix::zeros(rows, d);
        let mut log_probs = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..d {
                let (m, ls, e) = (head.mean[(i, j)], head.log_std[(i, j)], eps[(i, j)]);
                let u = m + ls.exp() * e;
                pre[(i, j)] = u;
                log_probs[i] += match self.squash {
                    Squash::Tanh => {
                        let a = u.tanh();
                        actions[(i, j)] = a;
                        -0.5 * e * e - ls - HALF_LOG_2PI - (1.0 - a * a + ACTION_EPS).ln()
                    }
                    Squash::ClippedIdentity => {
                        actions[(i, j)] = u.clamp(-1.0, 1.0);
                        let c = u.clamp(-1.0 + ACTION_EPS, 1.0 - ACTION_EPS);
                        if c == u {
                            -0.5 * e * e - ls - HALF_LOG_2PI
                        } else {
                            normal_logpdf(c, m, ls)
                        }
                    }
                };
            }
        }
        Ok(SampleTape {
            actions,
            log_probs,
            head,
            eps,
            pre,
        })
    }

    /// Pathwise gradients given dL/d(action) and dL/d(log_prob) per sample.
    pub fn sample_backward(&self, params: &ParamSet, tape: &SampleTape, d_actions: &Matrix, d_log_probs: &[f64]) -> Result<ParamSet> {
        let (rows, d) = (tape.actions.rows(), self.act_dim());
        let mut d_mean = Matrix::zeros(rows, d);
        let mut d_log_std = Matrix::zeros(rows, d);
        for i in 0..rows {
            let dlp = d_log_probs[i];
            for j in 0..d {
                let (m, ls, e, u) = (
                    tape.head.mean[(i, j)],
                    tape.head.log_std[(i, j)],
                    tape.eps[(i, j)],
                    tape.pre[(i, j)],
                );
                let std = ls.exp();
                let da = d_actions[(i, j)];
                let (du, mut dm, mut dls) = match self.squash {
                    Squash::Tanh => {
                        let a = tape.actions[(i, j)];
                        let jac = 1.0 - a * a;
                        (da * jac + dlp * 2.0 * a * jac / (jac + ACTION_EPS), 0.0, -dlp)
                    }
                    Squash::ClippedIdentity => {
                        let du = if u.abs() < 1.0 { da } else { 0.0 };
                        let c = u.clamp(-1.0 + ACTION_EPS, 1.0 - ACTION_EPS);
                        if c == u {
                            (du, 0.0, -dlp)
                        } else {
                            let z = (c - m) / std;
                            (du, dlp * z / std, dlp * (z * z - 1.0))
                        }
                    }
                };
                dm += du;
                dls += du * std * e;
                d_mean[(i, j)] = dm;
                d_log_std[(i, j)] = dls;
            }
        }
        self.head_backward(params, &tape.head, &d_mean, &d_log_std)
    }

    /// Log-density of given actions (clipped into the open unit box).
    pub fn log_prob_batch(&self, params: &ParamSet, obs: &Matrix, actions: &Matrix, mode: Mode<'_>) -> Result<LogProbTape> {
        if actions.cols() != self.act_dim() || actions.rows() != obs.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.act_dim(),
                actual: actions.cols(),
                context: "policy actions",
            });
        }
        let head = self.head(params, obs, mode)?;
        let (rows, d) = (obs.rows(), self.act_dim());
        let mut points = Matrix::zeros(rows, d);
        let mut log_probs = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..d {
                let a = actions[(i, j)].clamp(-1.0 + ACTION_EPS, 1.0 - ACTION_EPS);
                let (x, correction) = match self.squash {
                    Squash::Tanh => (libm::atanh(a), (1.0 - a * a + ACTION_EPS).ln()),
                    Squash::ClippedIdentity => (a, 0.0),
                };
                points[(i, j)] = x;
                log_probs[i] += normal_logpdf(x, head.mean[(i, j)], head.log_std[(i, j)]) - correction;
            }
        }
        Ok(LogProbTape {
            log_probs,
            head,
            points,
        })
    }

    pub fn log_prob_backward(&self, params: &ParamSet, tape: &LogProbTape, d_log_probs: &[f64]) -> Result<ParamSet> {
        let (rows, d) = (tape.points.rows(), self.act_dim());
        let mut d_mean = Matrix::zeros(rows, d);
        let mut d_log_std = Matrix::zeros(rows, d);
        for i in 0..rows {
            for j in 0..d {
                let std = tape.head.log_std[(i, j)].exp();
                let z = (tape.points[(i, j)] - tape.head.mean[(i, j)]) / std;
                d_mean[(i, j)] = d_log_probs[i] * z / std;
                d_log_std[(i, j)] = d_log_probs[i] * (z * z - 1.0);
            }
        }
        self.head_backward(params, &tape.head, &d_mean, &d_log_std)
    }
}

impl Policy for GaussianPolicy {
    fn act(&self, obs: &[f64], _t: usize) -> Result<Vec<f64>> {
        self.mean_action(obs)
    }
}

/// Evaluates a Gaussian policy by sampling instead of its mean.
pub struct SampledPolicy<'a> {
    pub policy: &'a GaussianPolicy,
    pub rng: std::cell::RefCell<Rng>,
}

impl Policy for SampledPolicy<'_> {
    fn act(&self, obs: &[f64], _t: usize) -> Result<Vec<f64>> {
        let mut rng = self.rng.borrow_mut();
        Ok(self.policy.sample_and_log_prob(obs, &mut rng)?.0)
    }
}
