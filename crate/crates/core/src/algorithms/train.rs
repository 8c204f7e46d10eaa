//! Offline training loop shared by all algorithms.

use std::io::Write;

use crate::categorical::{expand_support, support_from_dataset, ExpandStrategy, ValueSupport};
use crate::config::{Algorithm, HeadKind, RunConfig};
use crate::data::{sample_batch, Batch, OfflineDataset};
use crate::envs::{Env, Policy};
use crate::neural::Checkpoint;
use crate::evaluation::{evaluate_policy, fingerprint, EvalPoint, RunResult};
use crate::rng::{stream, Rng};
use crate::{Error, Result};

use super::critic::CriticHead;
use super::{Iql, LbSac, Rebrac};

pub const LOG_HEADER: &str = "step,critic_loss,actor_loss,mean_q_estimate,eval_return_mean,eval_return_std";

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;
const UPDATE_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 4;

/// Scalar diagnostics of one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub enum Agent {
    Rebrac(Rebrac),
    Iql(Iql),
    LbSac(LbSac),
}

/// Value support from the dataset's discounted returns, then expanded.
pub fn dataset_support(cfg: &RunConfig, dataset: &OfflineDataset) -> Result<Option<ValueSupport>> {
    if cfg.head != HeadKind::Ce {
        return Ok(None);
    }
    let cls = cfg
        .classification
        .as_ref()
        .ok_or_else(|| Error::Config("head \"ce\" requires a classification block".into()))?;
    let (lo, hi) = support_from_dataset(dataset, cfg.gamma())?;
    let (lo, hi) = expand_support(
        lo,
        hi,
        ExpandStrategy {
            kind: cls.expand_strategy,
            v_expand: cls.v_expand,
        },
    )?;
    Ok(Some(ValueSupport::new(lo, hi, cls.m)?))
}

pub fn build_head(cfg: &RunConfig, dataset: &OfflineDataset) -> Result<CriticHead> {
    match dataset_support(cfg, dataset)? {
        None => Ok(CriticHead::Scalar),
        Some(support) => {
            let ratio = cfg.classification.as_ref().map_or(0.75, |c| c.sigma_zeta_ratio);
            CriticHead::categorical(support, ratio)
        }
    }
}

impl Agent {
    pub fn new(cfg: &RunConfig, dataset: &OfflineDataset, rng: &mut Rng) -> Result<Self> {
        let head = build_head(cfg, dataset)?;
        let (obs_dim, act_dim) = (dataset.obs_dim(), dataset.act_dim());
        Ok(match cfg.algorithm {
            Algorithm::Rebrac => Agent::Rebrac(Rebrac::new(obs_dim, act_dim, &cfg.network, head, cfg.rebrac.clone(), rng)?),
            Algorithm::Iql => Agent::Iql(Iql::new(
                obs_dim,
                act_dim,
                &cfg.network,
                head,
                cfg.iql.clone(),
                cfg.n_steps,
                rng,
            )?),
            Algorithm::Lbsac => Agent::LbSac(LbSac::new(obs_dim, act_dim, &cfg.network, head, cfg.lbsac.clone(), rng)?),
        })
    }

    /// One training iteration; `step` counts from zero.
    pub fn update(&mut self, batch: &Batch, step: u64, rng: &mut Rng) -> Result<StepStats> {
        match self {
            Agent::Rebrac(a) => {
                let (critic_loss, mean_q) = a.critic_step(batch, rng)?;
                let actor_loss = if (step + 1) % a.cfg.actor_update_every == 0 {
                    Some(a.actor_step(batch)?)
                } else {
                    None
                };
                Ok(StepStats {
                    critic_loss,
                    actor_loss,
                    mean_q,
                })
            }
            Agent::Iql(a) => {
                a.value_step(batch, rng)?;
                let (critic_loss, mean_q) = a.q_step(batch)?;
                let actor_loss = a.actor_step(batch, rng)?;
                Ok(StepStats {
                    critic_loss,
                    actor_loss: Some(actor_loss),
                    mean_q,
                })
            }
            Agent::LbSac(a) => {
                let (critic_loss, mean_q) = a.critic_step(batch, rng)?;
                let (actor_loss, _) = a.actor_alpha_step(batch, rng)?;
                Ok(StepStats {
                    critic_loss,
                    actor_loss: Some(actor_loss),
                    mean_q,
                })
            }
        }
    }

    /// One named checkpoint per network, optimizer step counts included.
    pub fn checkpoints(&self) -> Vec<(String, Checkpoint)> {
        let mut out = Vec::new();
        let critics = match self {
            Agent::Rebrac(a) => {
                out.push(("actor".into(), Checkpoint::new(a.actor.spec, a.actor.params.clone(), Some(&a.actor_opt))));
                out.push(("actor_target".into(), Checkpoint::new(a.actor.spec, a.actor_target.clone(), None)));
                &a.critics
            }
            Agent::Iql(a) => {
                out.push(("actor".into(), Checkpoint::new(a.actor.spec, a.actor.params.clone(), Some(&a.actor_opt))));
                out.push(("value".into(), Checkpoint::new(a.value_spec, a.value.clone(), Some(&a.value_opt))));
                &a.critics
            }
            Agent::LbSac(a) => {
                out.push(("actor".into(), Checkpoint::new(a.actor.spec, a.actor.params.clone(), Some(&a.actor_opt))));
                &a.critics
            }
        };
        for (i, (net, opt)) in critics.nets.iter().zip(&critics.opts).enumerate() {
            out.push((format!("critic_{i}"), Checkpoint::new(critics.spec, net.clone(), Some(opt))));
        }
        for (i, net) in critics.targets.iter().enumerate() {
            out.push((format!("critic_target_{i}"), Checkpoint::new(critics.spec, net.clone(), None)));
        }
        out
    }

    /// Deterministic evaluation head.
    pub fn policy(&self) -> &dyn Policy {
        match self {
            Agent::Rebrac(a) => &a.actor,
            Agent::Iql(a) => &a.actor,
            Agent::LbSac(a) => &a.actor,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Agent::Rebrac(a) => a.is_finite(),
            Agent::Iql(a) => a.is_finite(),
            Agent::LbSac(a) => a.is_finite(),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Running mean of a diagnostic between two log rows.
#[derive(Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn take(&mut self) -> Option<f64> {
        let out = (self.n > 0).then(|| self.sum / self.n as f64);
        *self = Mean::default();
        out
    }
}

fn diverged(step: u64, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged {
            step,
            what: what.to_string(),
        },
        other => other,
    }
}

/// Trains for `cfg.n_steps` and evaluates at step 0, every `eval_every`
/// steps, and at the end. Log rows go to `log` as they are produced.
pub fn train(
    cfg: &RunConfig,
    dataset: &OfflineDataset,
    env: &dyn Env,
    mut log: Option<&mut dyn Write>,
) -> Result<(RunResult, Agent)> {
    cfg.validate()?;
    if env.obs_dim() != dataset.obs_dim() || env.act_dim() != dataset.act_dim() {
        return Err(Error::Config(format!(
            "dataset dims ({}, {}) do not match env {} ({}, {})",
            dataset.obs_dim(),
            dataset.act_dim(),
            env.name(),
            env.obs_dim(),
            env.act_dim()
        )));
    }
    let mut agent = Agent::new(cfg, dataset, &mut stream(cfg.seed, INIT_STREAM))?;
    let mut batch_rng = stream(cfg.seed, BATCH_STREAM);
    let mut update_rng = stream(cfg.seed, UPDATE_STREAM);
    let eval_seed = stream_seed(cfg.seed);

    let mut result = RunResult {
        fingerprint: fingerprint(&cfg.hyperparameters()?)?,
        seed: cfg.seed,
        evals: Vec::new(),
        final_score: f64::NAN,
        q_trace: Vec::new(),
    };
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "{LOG_HEADER}")?;
    }

    let (mut critic_mean, mut actor_mean, mut q_mean) = (Mean::default(), Mean::default(), Mean::default());
    let mut step = 0u64;
    loop {
        if step == 0 || step % cfg.eval_every == 0 || step == cfg.n_steps {
            let (mean, std) = evaluate_policy(env, agent.policy(), cfg.eval_episodes, eval_seed)?;
            let q = q_mean.take();
            if let Some(q) = q {
                result.q_trace.push((step, q));
            }
            if let Some(w) = log.as_deref_mut() {
                writeln!(
                    w,
                    "{step},{},{},{},{mean},{std}",
                    fmt_opt(critic_mean.take()),
                    fmt_opt(actor_mean.take()),
                    fmt_opt(q)
                )?;
                w.flush()?;
            }
            result.evals.push(EvalPoint {
                step,
                mean,
                std,
                n_episodes: cfg.eval_episodes,
            });
        }
        if step == cfg.n_steps {
            break;
        }
        let batch = sample_batch(dataset, cfg.batch_size(), &mut batch_rng)?;
        let stats = agent
            .update(&batch, step, &mut update_rng)
            .map_err(|e| diverged(step, e))?;
        let finite = stats.critic_loss.is_finite()
            && stats.mean_q.is_finite()
            && stats.actor_loss.is_none_or(f64::is_finite);
        if !finite || !agent.is_finite() {
            return Err(Error::Diverged {
                step,
                what: format!(
                    "critic_loss={} actor_loss={} mean_q={}",
                    stats.critic_loss,
                    fmt_opt(stats.actor_loss),
                    stats.mean_q
                ),
            });
        }
        critic_mean.push(stats.critic_loss);
        q_mean.push(stats.mean_q);
        if let Some(a) = stats.actor_loss {
            actor_mean.push(a);
        }
        step += 1;
    }
    result.final_score = result.evals.last().map_or(f64::NAN, |e| e.mean);
    Ok((result, agent))
}

fn stream_seed(seed: u64) -> u64 {
    use rand::RngCore;
    stream(seed, EVAL_STREAM).next_u64()
}
