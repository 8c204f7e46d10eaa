//! Finite-difference gradient suites shared by the unit-style tests and the
//! acceptance runner. Each returns the norm-relative error of every case.
#![allow(dead_code)]

use clorl_core::actors::{GaussianPolicy, Squash};
use clorl_core::algorithms::critic::critic_input;
use clorl_core::algorithms::{
    CriticEnsemble, CriticHead, Iql, IqlConfig, LbSac, LbSacConfig, NetworkConfig, Rebrac, RebracConfig,
};
use clorl_core::categorical::{ce_loss_and_grad, target_to_probs, HlGaussParams, ValueSupport};
use clorl_core::neural::{Matrix, MlpSpec, Mode, ParamSet};
use clorl_core::rng::{normal, seeded, uniform};
use rand::Rng as _;

use super::{fd_grad, fd_vec, gaussian_matrix, random_batch, random_matrix, rel_err};

const H: f64 = 1e-6;

/// Moves parameters off the exact zeros of a fresh init, where a dead
/// ReLU layer leaves the next pre-activation sitting on its kink.
fn jitter(p: &mut ParamSet, seed: u64) {
    let mut rng = seeded(seed ^ 0x5eed);
    for v in p.as_mut_slice() {
        *v += 0.1 * normal(&mut rng);
    }
}

pub fn ce_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(1000 + seed);
            let m = rng.random_range(2..60);
            let support = ValueSupport::new(-5.0, 5.0, m).unwrap();
            let hl = HlGaussParams::new(uniform(&mut rng, 0.3, 2.0), &support).unwrap();
            let target = target_to_probs(uniform(&mut rng, -6.0, 6.0), &support, &hl);
            let logits: Vec<f64> = (0..m).map(|_| 3.0 * normal(&mut rng)).collect();
            let (_, grad) = ce_loss_and_grad(&logits, &target).unwrap();
            let fd = fd_vec(&logits, H, |z| ce_loss_and_grad(z, &target).unwrap().0);
            rel_err(&grad, &fd)
        })
        .collect()
}

pub fn mlp_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(2000 + seed);
            let spec = MlpSpec::new(
                rng.random_range(1..6),
                rng.random_range(2..10),
                rng.random_range(0..4),
                rng.random_range(1..5),
            );
            let mut params = spec.init(&mut rng).unwrap();
            jitter(&mut params, seed);
            let rows = rng.random_range(1..6);
            let x = gaussian_matrix(rows, spec.input_dim, 1.0, &mut rng);
            let up = gaussian_matrix(rows, spec.output_dim, 1.0, &mut rng);
            let loss = |p: &_, x: &Matrix| -> f64 {
                let (out, _) = spec.forward_batch(p, x, Mode::Eval).unwrap();
                out.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum()
            };
            let (_, tape) = spec.forward_batch(&params, &x, Mode::Eval).unwrap();
            let (grad, d_in) = spec.backward_batch(&params, &tape, &up).unwrap();
            let fd_p = fd_grad(&params, H, |p| loss(p, &x));
            let fd_x = fd_vec(x.as_slice(), H, |v| loss(&params, &Matrix::from_vec(rows, spec.input_dim, v.to_vec())));
            rel_err(grad.as_slice(), &fd_p).max(rel_err(d_in.as_slice(), &fd_x))
        })
        .collect()
}

fn random_policy(seed: u64, squash: Squash) -> (GaussianPolicy, usize, usize) {
    let mut rng = seeded(seed);
    let obs_dim = rng.random_range(1..5);
    let act_dim = rng.random_range(1..4);
    let mut policy = GaussianPolicy::init(obs_dim, act_dim, (rng.random_range(3..9), rng.random_range(1..3)), squash, 0.0, &mut rng).unwrap();
    jitter(&mut policy.params, seed);
    (policy, obs_dim, act_dim)
}

/// Gradient of a weighted sum of log-probabilities at fixed actions.
pub fn log_prob_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let squash = if seed % 2 == 0 { Squash::Tanh } else { Squash::ClippedIdentity };
            let (policy, obs_dim, act_dim) = random_policy(3000 + seed, squash);
            let mut rng = seeded(3500 + seed);
            let rows = rng.random_range(1..6);
            let obs = gaussian_matrix(rows, obs_dim, 1.0, &mut rng);
            let actions = random_matrix(rows, act_dim, -0.99, 0.99, &mut rng);
            let w: Vec<f64> = (0..rows).map(|_| normal(&mut rng)).collect();
            let loss = |p: &_| -> f64 {
                let t = policy.log_prob_batch(p, &obs, &actions, Mode::Eval).unwrap();
                t.log_probs.iter().zip(&w).map(|(l, w)| l * w).sum()
            };
            let tape = policy.log_prob_batch(&policy.params, &obs, &actions, Mode::Eval).unwrap();
            let grad = policy.log_prob_backward(&policy.params, &tape, &w).unwrap();
            rel_err(grad.as_slice(), &fd_grad(&policy.params, H, loss))
        })
        .collect()
}

/// Pathwise gradient of `sum(c * action + d * log_prob)` with frozen noise.
pub fn sample_path_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let squash = if seed % 2 == 0 { Squash::Tanh } else { Squash::ClippedIdentity };
            let (policy, obs_dim, act_dim) = random_policy(4000 + seed, squash);
            let mut rng = seeded(4500 + seed);
            let rows = rng.random_range(1..6);
            let obs = gaussian_matrix(rows, obs_dim, 1.0, &mut rng);
            let c = gaussian_matrix(rows, act_dim, 1.0, &mut rng);
            let d: Vec<f64> = (0..rows).map(|_| normal(&mut rng)).collect();
            let noise_seed = 5000 + seed;
            let loss = |p: &_| -> f64 {
                let t = policy.sample_batch(p, &obs, &mut seeded(noise_seed), Mode::Eval).unwrap();
                let lin: f64 = t.actions.as_slice().iter().zip(c.as_slice()).map(|(a, c)| a * c).sum();
                lin + t.log_probs.iter().zip(&d).map(|(l, d)| l * d).sum::<f64>()
            };
            let tape = policy.sample_batch(&policy.params, &obs, &mut seeded(noise_seed), Mode::Eval).unwrap();
            let grad = policy.sample_backward(&policy.params, &tape, &c, &d).unwrap();
            rel_err(grad.as_slice(), &fd_grad(&policy.params, H, loss))
        })
        .collect()
}

fn small_net(seed: u64) -> NetworkConfig {
    NetworkConfig {
        hidden_dim: 4 + (seed as usize % 5),
        n_hidden_layers: 1 + (seed as usize % 2),
    }
}

fn ce_head(seed: u64) -> CriticHead {
    let m = 5 + (seed as usize * 7) % 40;
    CriticHead::categorical(ValueSupport::new(-3.0, 1.0, m).unwrap(), 0.75).unwrap()
}

/// Cross-entropy critic loss through softmax and the HL-Gauss targets.
pub fn categorical_critic_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(6000 + seed);
            let (obs_dim, act_dim) = (rng.random_range(1..4), rng.random_range(1..3));
            let mut ens = CriticEnsemble::new(obs_dim, act_dim, &small_net(seed), ce_head(seed), 2, 1e-3, &mut rng).unwrap();
            ens.nets.iter_mut().for_each(|p| jitter(p, seed));
            let batch = random_batch(rng.random_range(1..6), obs_dim, act_dim, 6500 + seed);
            let x = critic_input(&batch.observations, &batch.actions);
            let y: Vec<f64> = (0..batch.len()).map(|_| uniform(&mut rng, -3.5, 1.5)).collect();
            let (_, grads, _) = ens.loss_and_grads(&x, &y).unwrap();
            (0..2)
                .map(|k| {
                    let fd = fd_grad(&ens.nets[k], H, |p| {
                        let mut e = ens.clone();
                        e.nets[k] = p.clone();
                        e.loss_and_grads(&x, &y).unwrap().0
                    });
                    rel_err(grads[k].as_slice(), &fd)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn head_for(seed: u64) -> CriticHead {
    if seed % 2 == 0 {
        CriticHead::Scalar
    } else {
        ce_head(seed)
    }
}

/// Actor loss of the behavior-regularized algorithm through the critic min.
pub fn rebrac_actor_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(7000 + seed);
            let cfg = RebracConfig {
                beta1: 0.3,
                ..Default::default()
            };
            let mut agent = Rebrac::new(3, 2, &small_net(seed), head_for(seed), cfg, &mut rng).unwrap();
            jitter(&mut agent.actor.params, seed);
            agent.critics.nets.iter_mut().for_each(|p| jitter(p, seed + 1));
            let batch = random_batch(4, 3, 2, 7500 + seed);
            let lambda = agent.q_scale(&batch).unwrap();
            let (_, grad) = agent.actor_loss_and_grad(&batch).unwrap();
            let fd = fd_grad(&agent.actor.params, H, |p| {
                let mut a = agent.clone();
                a.actor.params = p.clone();
                a.actor_loss_and_grad_with(&batch, Some(lambda)).unwrap().0
            });
            rel_err(grad.as_slice(), &fd)
        })
        .collect()
}

pub fn iql_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(8000 + seed);
            let mut agent = Iql::new(3, 2, &small_net(seed), head_for(seed), IqlConfig::default(), 100, &mut rng).unwrap();
            jitter(&mut agent.actor.params, seed);
            jitter(&mut agent.value, seed + 1);
            agent.critics.targets.iter_mut().for_each(|p| jitter(p, seed + 2));
            let batch = random_batch(4, 3, 2, 8500 + seed);
            let (_, g_v) = agent.value_loss_and_grad(&batch, &mut seeded(0)).unwrap();
            let fd_v = fd_grad(&agent.value, H, |p| {
                let mut a = agent.clone();
                a.value = p.clone();
                a.value_loss_and_grad(&batch, &mut seeded(0)).unwrap().0
            });
            let (_, g_a) = agent.actor_loss_and_grad(&batch, &mut seeded(0)).unwrap();
            let fd_a = fd_grad(&agent.actor.params, H, |p| {
                let mut a = agent.clone();
                a.actor.params = p.clone();
                a.actor_loss_and_grad(&batch, &mut seeded(0)).unwrap().0
            });
            rel_err(g_v.as_slice(), &fd_v).max(rel_err(g_a.as_slice(), &fd_a))
        })
        .collect()
}

pub fn lbsac_actor_cases(n: usize) -> Vec<f64> {
    (0..n as u64)
        .map(|seed| {
            let mut rng = seeded(9000 + seed);
            let cfg = LbSacConfig {
                n_critics: 3,
                ..Default::default()
            };
            let mut agent = LbSac::new(3, 2, &small_net(seed), head_for(seed), cfg, &mut rng).unwrap();
            agent.log_alpha = -0.7;
            jitter(&mut agent.actor.params, seed);
            agent.critics.nets.iter_mut().for_each(|p| jitter(p, seed + 1));
            let batch = random_batch(4, 3, 2, 9500 + seed);
            let (_, grad, _) = agent.actor_loss_and_grad(&batch, &mut seeded(1)).unwrap();
            let fd = fd_grad(&agent.actor.params, H, |p| {
                let mut a = agent.clone();
                a.actor.params = p.clone();
                a.actor_loss_and_grad(&batch, &mut seeded(1)).unwrap().0
            });
            rel_err(grad.as_slice(), &fd)
        })
        .collect()
}
