//! Q-function ensembles with a scalar or categorical output head.

use crate::categorical::{
    ce_value_loss_and_grad_into, dot, softmax_into, target_to_probs_into, HlGaussParams, ValueSupport,
};
use crate::neural::{soft_update, AdamState, LrSchedule, Matrix, MlpSpec, Mode, ParamSet, Tape};
use crate::rng::Rng;
use crate::{Error, Result};

use super::NetworkConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum CriticHead {
    /// One output trained with squared error.
    Scalar,
    /// `m` logits over the support, trained with cross-entropy to HL-Gauss targets.
    Categorical {
        support: ValueSupport,
        hl: HlGaussParams,
    },
}

impl CriticHead {
    pub fn categorical(support: ValueSupport, sigma_zeta_ratio: f64) -> Result<Self> {
        let hl = HlGaussParams::new(sigma_zeta_ratio, &support)?;
        Ok(CriticHead::Categorical { support, hl })
    }

    pub fn output_dim(&self) -> usize {
        match self {
            CriticHead::Scalar => 1,
            CriticHead::Categorical { support, .. } => support.m(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, CriticHead::Categorical { .. })
    }

    /// Scalar value of every row of raw network outputs.
    pub fn values(&self, out: &Matrix) -> Vec<f64> {
        match self {
            CriticHead::Scalar => out.as_slice().to_vec(),
            CriticHead::Categorical { support, .. } => {
                let mut probs = vec![0.0; support.m()];
                out.iter_rows()
                    .map(|row| {
                        softmax_into(row, &mut probs);
                        dot(&probs, support.centers())
                    })
                    .collect()
            }
        }
    }

    /// Per-row training targets: `y` itself, or its HL-Gauss histogram.
    pub fn encode_targets(&self, y: &[f64]) -> Matrix {
        match self {
            CriticHead::Scalar => Matrix::from_vec(y.len(), 1, y.to_vec()),
            CriticHead::Categorical { support, hl } => {
                let mut enc = Matrix::zeros(y.len(), support.m());
                for (i, &t) in y.iter().enumerate() {
                    target_to_probs_into(t, support, hl, enc.row_mut(i));
                }
                enc
            }
        }
    }

    /// Batch-mean loss against scalar targets `y` and its gradient w.r.t. `out`.
    pub fn loss_and_grad(&self, out: &Matrix, y: &[f64]) -> (f64, Matrix) {
        let (loss, grad, _) = self.encoded_loss_and_grad(out, &self.encode_targets(y));
        (loss, grad)
    }

    /// Loss and gradient against targets from [`Self::encode_targets`], plus
    /// the scalarized value of every row.
    pub fn encoded_loss_and_grad(&self, out: &Matrix, targets: &Matrix) -> (f64, Matrix, Vec<f64>) {
        let n = out.rows() as f64;
        let mut grad = Matrix::zeros(out.rows(), out.cols());
        let mut loss = 0.0;
        let values = match self {
            CriticHead::Scalar => {
                for (i, (&q, &t)) in out.as_slice().iter().zip(targets.as_slice()).enumerate() {
                    let d = q - t;
                    loss += d * d;
                    grad.as_mut_slice()[i] = 2.0 * d / n;
                }
                out.as_slice().to_vec()
            }
            CriticHead::Categorical { support, .. } => (0..out.rows())
                .map(|i| {
                    let g = grad.row_mut(i);
                    let (l, v) = ce_value_loss_and_grad_into(out.row(i), targets.row(i), support.centers(), g);
                    g.iter_mut().for_each(|x| *x /= n);
                    loss += l;
                    v
                })
                .collect(),
        };
        (loss / n, grad, values)
    }

    /// Gradient w.r.t. `out` given dL/d(value) per row.
    pub fn value_grad(&self, out: &Matrix, d_values: &[f64]) -> Matrix {
        match self {
            CriticHead::Scalar => Matrix::from_vec(out.rows(), 1, d_values.to_vec()),
            CriticHead::Categorical { support, .. } => {
                let mut grad = Matrix::zeros(out.rows(), out.cols());
                for (i, &dv) in d_values.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let g = grad.row_mut(i);
                    softmax_into(out.row(i), g);
                    let q = dot(g, support.centers());
                    for (gj, &c) in g.iter_mut().zip(support.centers()) {
                        *gj *= dv * (c - q);
                    }
                }
                grad
            }
        }
    }
}

/// Online networks of a min-ensemble evaluated with a tape.
#[derive(Debug, Clone)]
pub struct MinForward {
    pub values: Vec<f64>,
    argmin: Vec<usize>,
    outputs: Vec<Matrix>,
    tapes: Vec<Tape>,
}

/// `n` critics `Q(s, a)` over concatenated `[obs, action]` inputs, with
/// target copies and one optimizer per network.
#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    pub spec: MlpSpec,
    pub head: CriticHead,
    pub nets: Vec<ParamSet>,
    pub targets: Vec<ParamSet>,
    pub opts: Vec<AdamState>,
}

pub fn critic_input(obs: &Matrix, actions: &Matrix) -> Matrix {
    obs.hconcat(actions)
}

impl CriticEnsemble {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        network: &NetworkConfig,
        head: CriticHead,
        n: usize,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("critic ensemble needs at least one network".into()));
        }
        let spec = network.spec(obs_dim + act_dim, head.output_dim());
        let nets = (0..n).map(|_| spec.init(rng)).collect::<Result<Vec<_>>>()?;
        let opts = nets
            .iter()
            .map(|p| AdamState::for_params(p, lr, LrSchedule::Constant))
            .collect();
        Ok(Self {
            spec,
            head,
            targets: nets.clone(),
            nets,
            opts,
        })
    }

    pub fn len(&self) -> usize {
        self.nets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nets.is_empty()
    }

    /// Scalarized values of every network in `params` (online or target).
    pub fn values_with(&self, params: &[ParamSet], x: &Matrix) -> Result<Vec<Vec<f64>>> {
        params
            .iter()
            .map(|p| {
                let (out, _) = self.spec.forward_batch(p, x, Mode::Eval)?;
                Ok(self.head.values(&out))
            })
            .collect()
    }

    /// Row-wise minimum over the networks of scalarized values.
    pub fn min_values_with(&self, params: &[ParamSet], x: &Matrix) -> Result<Vec<f64>> {
        let all = self.values_with(params, x)?;
        Ok(row_min(&all).0)
    }

    pub fn target_min(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.min_values_with(&self.targets, x)
    }

    /// Loss summed over networks (each a batch mean) and per-network gradients.
    ///
    /// Also returns the row-wise min of the online values on `x`.
    pub fn loss_and_grads(&self, x: &Matrix, y: &[f64]) -> Result<(f64, Vec<ParamSet>, Vec<f64>)> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                actual: y.len(),
                context: "critic targets",
            });
        }
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(self.nets.len());
        let mut values = Vec::with_capacity(self.nets.len());
        let targets = self.head.encode_targets(y);
        for p in &self.nets {
            let (out, tape) = self.spec.forward_batch(p, x, Mode::Eval)?;
            let (loss, d_out, v) = self.head.encoded_loss_and_grad(&out, &targets);
            total += loss;
            grads.push(self.spec.backward_batch(p, &tape, &d_out)?.0);
            values.push(v);
        }
        Ok((total, grads, row_min(&values).0))
    }

    pub fn apply(&mut self, grads: &[ParamSet]) -> Result<()> {
        for ((p, opt), g) in self.nets.iter_mut().zip(&mut self.opts).zip(grads) {
            opt.step(p, g)?;
        }
        Ok(())
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        for (t, p) in self.targets.iter_mut().zip(&self.nets) {
            soft_update(t, p, tau)?;
        }
        Ok(())
    }

    /// Online forward pass retaining what [`Self::min_input_grad`] needs.
    pub fn forward_min(&self, x: &Matrix) -> Result<MinForward> {
        let mut outputs = Vec::with_capacity(self.nets.len());
        let mut tapes = Vec::with_capacity(self.nets.len());
        let mut all = Vec::with_capacity(self.nets.len());
        for p in &self.nets {
            let (out, tape) = self.spec.forward_batch(p, x, Mode::Eval)?;
            all.push(self.head.values(&out));
            outputs.push(out);
            tapes.push(tape);
        }
        let (values, argmin) = row_min(&all);
        Ok(MinForward {
            values,
            argmin,
            outputs,
            tapes,
        })
    }

    /// Gradient w.r.t. the critic input given dL/d(min value) per row.
    pub fn min_input_grad(&self, fwd: &MinForward, d_values: &[f64]) -> Result<Matrix> {
        let rows = fwd.values.len();
        let mut total = Matrix::zeros(rows, self.spec.input_dim);
        for (k, p) in self.nets.iter().enumerate() {
            let masked: Vec<f64> = (0..rows)
                .map(|i| if fwd.argmin[i] == k { d_values[i] } else { 0.0 })
                .collect();
            if masked.iter().all(|&d| d == 0.0) {
                continue;
            }
            let d_out = self.head.value_grad(&fwd.outputs[k], &masked);
            let (_, d_in) = self.spec.backward_batch(p, &fwd.tapes[k], &d_out)?;
            for (t, &d) in total.as_mut_slice().iter_mut().zip(d_in.as_slice()) {
                *t += d;
            }
        }
        Ok(total)
    }

    pub fn is_finite(&self) -> bool {
        self.nets.iter().chain(&self.targets).all(ParamSet::is_finite)
    }
}

/// Row-wise min over per-network value columns, with the first minimizing index.
pub fn row_min(values: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let rows = values.first().map_or(0, Vec::len);
    let mut min = values.first().cloned().unwrap_or_default();
    let mut arg = vec![0; rows];
    for (k, col) in values.iter().enumerate().skip(1) {
        for (i, &v) in col.iter().enumerate() {
            if v < min[i] {
                min[i] = v;
                arg[i] = k;
            }
        }
    }
    (min, arg)
}

/// Action columns of an input gradient laid out as `[obs, action]`.
pub fn action_columns(d_input: &Matrix, obs_dim: usize) -> Matrix {
    d_input.columns(obs_dim, d_input.cols())
}
