#![allow(dead_code)]
pub mod criteria;
pub mod gradcheck;
pub mod oracle;

use clorl_core::data::Batch;
use clorl_core::neural::{Matrix, ParamSet};
use clorl_core::rng::{normal, seeded, uniform, Rng};

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| uniform(rng, lo, hi)).collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * normal(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Random transitions with actions strictly inside the unit box.
pub fn random_batch(n: usize, obs_dim: usize, act_dim: usize, seed: u64) -> Batch {
    let mut rng = seeded(seed);
    Batch {
        observations: random_matrix(n, obs_dim, -1.0, 1.0, &mut rng),
        actions: random_matrix(n, act_dim, -0.95, 0.95, &mut rng),
        rewards: (0..n).map(|_| uniform(&mut rng, -1.0, 0.0)).collect(),
        next_observations: random_matrix(n, obs_dim, -1.0, 1.0, &mut rng),
        next_actions: random_matrix(n, act_dim, -0.95, 0.95, &mut rng),
        dones: (0..n).map(|i| if i % 5 == 4 { 1.0 } else { 0.0 }).collect(),
        indices: (0..n).collect(),
    }
}

/// Central differences of `f` with respect to every entry of `params`.
pub fn fd_grad(params: &ParamSet, h: f64, mut f: impl FnMut(&ParamSet) -> f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.n_params())
        .map(|i| {
            let orig = p.as_slice()[i];
            p.as_mut_slice()[i] = orig + h;
            let plus = f(&p);
            p.as_mut_slice()[i] = orig - h;
            let minus = f(&p);
            p.as_mut_slice()[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

pub fn fd_vec(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
