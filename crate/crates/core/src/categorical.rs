//! Categorical value heads.
//!
//! A scalar return is represented as a distribution over `m` equal-width bins
//! spanning `[v_min, v_max]`. Scalar targets are spread over neighbouring bins
//! with the HL-Gauss transform (a Gaussian of std `sigma` integrated over each
//! bin via `erf`), and predicted distributions are collapsed back to a scalar by
//! taking the expectation over bin centers.
//!
//! All functions here are pure.

use serde::{Deserialize, Serialize};

use crate::data::OfflineDataset;
use crate::{Error, Result};

/// Normalization guard added to the total in-support mass.
pub const PROB_EPS: f64 = 1e-6;

/// Bin geometry of a categorical value head.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSupport {
    edges: Vec<f64>,
    centers: Vec<f64>,
    zeta: f64,
}

impl ValueSupport {
    /// Builds `m` evenly spaced bins over `[v_min, v_max]`.
    pub fn new(v_min: f64, v_max: f64, m: usize) -> Result<Self> {
        if !v_min.is_finite() || !v_max.is_finite() {
            return Err(Error::InvalidSupport(format!(
                "bounds must be finite, got [{v_min}, {v_max}]"
            )));
        }
        if v_max <= v_min {
            return Err(Error::InvalidSupport(format!(
                "degenerate support: v_max ({v_max}) <= v_min ({v_min})"
            )));
        }
        if m < 2 {
            return Err(Error::InvalidSupport(format!("need at least 2 bins, got {m}")));
        }
        let range = v_max - v_min;
        let mut edges: Vec<f64> = (0..=m)
            .map(|i| v_min + range * (i as f64) / (m as f64))
            .collect();
        edges[m] = v_max;
        let centers = edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        Ok(Self {
            edges,
            centers,
            zeta: range / m as f64,
        })
    }

    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn v_min(&self) -> f64 {
        self.edges[0]
    }

    pub fn v_max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin midpoints, the atoms of the categorical distribution.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
}

/// Width of the HL-Gauss smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlGaussParams {
    sigma_zeta_ratio: f64,
    sigma: f64,
}

impl HlGaussParams {
    pub fn new(sigma_zeta_ratio: f64, support: &ValueSupport) -> Result<Self> {
        if !(sigma_zeta_ratio > 0.0) || !sigma_zeta_ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma/zeta ratio must be positive, got {sigma_zeta_ratio}"
            )));
        }
        Ok(Self {
            sigma_zeta_ratio,
            sigma: sigma_zeta_ratio * support.zeta(),
        })
    }

    pub fn sigma_zeta_ratio(&self) -> f64 {
        self.sigma_zeta_ratio
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpandKind {
    /// Enlarge downwards only.
    Min,
    /// Split the enlargement evenly between both bounds.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpandStrategy {
    pub kind: ExpandKind,
    /// Fraction of the support size to add; negative values shrink it.
    pub v_expand: f64,
}

/// Enlarges (or shrinks) a dataset-derived support.
pub fn expand_support(v_min: f64, v_max: f64, strategy: ExpandStrategy) -> Result<(f64, f64)> {
    if v_max <= v_min {
        return Err(Error::InvalidSupport(format!(
            "cannot expand degenerate support [{v_min}, {v_max}]"
        )));
    }
    let delta = strategy.v_expand * (v_max - v_min);
    let (lo, hi) = match strategy.kind {
        ExpandKind::Min => (v_min - delta, v_max),
        ExpandKind::Both => (v_min - delta / 2.0, v_max + delta / 2.0),
    };
    if hi <= lo {
        return Err(Error::InvalidSupport(format!(
            "v_expand {} collapses the support to [{lo}, {hi}]",
            strategy.v_expand
        )));
    }
    Ok((lo, hi))
}

/// HL-Gauss encoding of a scalar target into bin probabilities.
///
/// Targets are not clamped: a target far outside the support yields a
/// near-zero vector because of the [`PROB_EPS`] guard.
pub fn target_to_probs(target: f64, support: &ValueSupport, params: &HlGaussParams) -> Vec<f64> {
    let mut out = vec![0.0; support.m()];
    target_to_probs_into(target, support, params, &mut out);
    out
}

pub fn target_to_probs_into(
    target: f64,
    support: &ValueSupport,
    params: &HlGaussParams,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), support.m());
    let scale = std::f64::consts::SQRT_2 * params.sigma();
    let edges = support.edges();
    let first = libm::erf((edges[0] - target) / scale);
    let last = libm::erf((edges[edges.len() - 1] - target) / scale);
    let norm = last - first + PROB_EPS;
    let mut prev = first;
    for (i, p) in out.iter_mut().enumerate() {
        let next = if i + 1 == edges.len() - 1 {
            last
        } else {
            libm::erf((edges[i + 1] - target) / scale)
        };
        *p = (next - prev) / norm;
        prev = next;
    }
}

/// Expected value of a bin distribution.
pub fn probs_to_value(probs: &[f64], support: &ValueSupport) -> Result<f64> {
    if probs.len() != support.m() {
        return Err(Error::DimensionMismatch {
            expected: support.m(),
            actual: probs.len(),
            context: "probability vector",
        });
    }
    Ok(dot(probs, support.centers()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted softmax written into `out`; returns the log-partition term.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Softmax cross-entropy against (possibly unnormalized) target weights.
///
/// The gradient is `softmax * sum(target) - target`, which reduces to the
/// familiar `softmax - target` when the target sums to one.
pub fn ce_loss_and_grad(logits: &[f64], target_probs: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != target_probs.len() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            actual: target_probs.len(),
            context: "cross-entropy target",
        });
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    if target_probs.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "target probabilities must be non-negative".into(),
        ));
    }
    let mut grad = vec![0.0; logits.len()];
    let loss = ce_loss_and_grad_into(logits, target_probs, &mut grad);
    Ok((loss, grad))
}

/// Unchecked kernel behind [`ce_loss_and_grad`]; `grad` receives dL/dlogits.
pub(crate) fn ce_loss_and_grad_into(logits: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
    let log_z = softmax_into(logits, grad);
    ce_from_softmax(logits, log_z, target, grad)
}

/// As [`ce_loss_and_grad_into`], also returning the expected value of the
/// predicted distribution over `centers`.
pub(crate) fn ce_value_loss_and_grad_into(
    logits: &[f64],
    target: &[f64],
    centers: &[f64],
    grad: &mut [f64],
) -> (f64, f64) {
    let log_z = softmax_into(logits, grad);
    let value = dot(grad, centers);
    (ce_from_softmax(logits, log_z, target, grad), value)
}

/// Turns the softmax held in `grad` into dL/dlogits; returns the loss.
fn ce_from_softmax(logits: &[f64], log_z: f64, target: &[f64], grad: &mut [f64]) -> f64 {
    let mass: f64 = target.iter().sum();
    let mut loss = 0.0;
    for ((g, &t), &l) in grad.iter_mut().zip(target).zip(logits) {
        loss -= t * (l - log_z);
        *g = *g * mass - t;
    }
    loss
}

/// Minimum and maximum discounted suffix return over every start index of
/// every episode, without bootstrapping past episode ends.
pub fn support_from_dataset(dataset: &OfflineDataset, gamma: f64) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount must lie in (0, 1), got {gamma}"
        )));
    }
    let rewards = dataset.rewards();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for range in dataset.episode_ranges() {
        let mut ret = 0.0;
        for t in range.rev() {
            ret = f64::from(rewards[t]) + gamma * ret;
            lo = lo.min(ret);
            hi = hi.max(ret);
        }
    }
    Ok((lo, hi))
}
