use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_hidden_layers: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub dropout_rate: f64,
}

/// Forward-pass mode. Dropout is only active in training.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

/// Network parameters stored as one flat buffer.
///
/// Layer `l` occupies a `fan_in x fan_out` row-major weight block followed by
/// its `fan_out` biases; layers follow each other in forward order. Optimizer
/// state and target copies align with this flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    shapes: Vec<LayerShape>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let mut shapes = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in spec.layer_dims() {
            shapes.push(LayerShape {
                fan_in,
                fan_out,
                offset,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Self {
            shapes,
            data: vec![0.0; offset],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shapes: self.shapes.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn n_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(fan_in, fan_out)` of layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        (self.shapes[l].fan_in, self.shapes[l].fan_out)
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.data[self.shapes[l].weights()]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.shapes[l].weights();
        &mut self.data[r]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.data[self.shapes[l].bias()]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.shapes[l].bias();
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.shapes == other.shapes
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &ParamSet) {
        assert!(self.same_shape(other), "parameter shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Activations recorded by a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer (post-activation, post-dropout for hidden layers).
    inputs: Vec<Matrix>,
    /// Per hidden layer dropout scale factors (0 or `1/(1-p)`).
    masks: Vec<Option<Vec<f64>>>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, n_hidden_layers: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            n_hidden_layers,
            output_dim,
            activation: Activation::Relu,
            dropout_rate: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArgument("network dims must be positive".into()));
        }
        if self.n_hidden_layers > 0 && self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.n_hidden_layers + 1);
        let mut fan_in = self.input_dim;
        for _ in 0..self.n_hidden_layers {
            dims.push((fan_in, self.hidden_dim));
            fan_in = self.hidden_dim;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn n_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Uniform fan-in initialization, zero biases.
    pub fn init(&self, rng: &mut Rng) -> Result<ParamSet> {
        self.validate()?;
        let mut params = ParamSet::zeros(self);
        for l in 0..params.n_layers() {
            let (fan_in, _) = params.layer_dims(l);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in params.weights_mut(l) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    fn check_params(&self, params: &ParamSet) -> Result<()> {
        let dims = self.layer_dims();
        if params.n_layers() != dims.len()
            || dims.iter().enumerate().any(|(l, &d)| params.layer_dims(l) != d)
        {
            return Err(Error::InvalidArgument(
                "parameter set does not match network spec".into(),
            ));
        }
        Ok(())
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, params: &ParamSet, x: &Matrix, mut mode: Mode<'_>) -> Result<(Matrix, Tape)> {
        self.check_params(params)?;
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.cols(),
                context: "network input",
            });
        }
        let batch = x.rows();
        let n_layers = params.n_layers();
        let mut tape = Tape {
            inputs: Vec::with_capacity(n_layers),
            masks: Vec::with_capacity(n_layers.saturating_sub(1)),
        };
        tape.inputs.push(x.clone());
        for l in 0..n_layers {
            let (fan_in, fan_out) = params.layer_dims(l);
            let bias = params.bias(l);
            let mut z = Matrix::from_vec(batch, fan_out, bias.repeat(batch));
            let input = &tape.inputs[l];
            gemm(
                1.0,
                input.as_slice(),
                (batch, fan_in),
                false,
                params.weights(l),
                (fan_in, fan_out),
                false,
                1.0,
                z.as_mut_slice(),
            );
            if l + 1 == n_layers {
                return Ok((z, tape));
            }
            z.map_inplace(|v| v.max(0.0));
            let mask = match &mut mode {
                Mode::Train(rng) if self.dropout_rate > 0.0 => {
                    let keep_scale = 1.0 / (1.0 - self.dropout_rate);
                    let mask: Vec<f64> = (0..z.as_slice().len())
                        .map(|_| {
                            if rng.random::<f64>() < self.dropout_rate {
                                0.0
                            } else {
                                keep_scale
                            }
                        })
                        .collect();
                    for (v, s) in z.as_mut_slice().iter_mut().zip(&mask) {
                        *v *= s;
                    }
                    Some(mask)
                }
                _ => None,
            };
            tape.masks.push(mask);
            tape.inputs.push(z);
        }
        unreachable!("a network always has an output layer")
    }

    /// Reverse-mode gradients of `sum(output * upstream)` with respect to the
    /// parameters and the input.
    pub fn backward_batch(&self, params: &ParamSet, tape: &Tape, upstream: &Matrix) -> Result<(ParamSet, Matrix)> {
        self.check_params(params)?;
        let batch = tape.inputs[0].rows();
        if upstream.rows() != batch || upstream.cols() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                actual: upstream.cols(),
                context: "upstream gradient",
            });
        }
        let mut grads = params.zeros_like();
        let mut delta = upstream.clone();
        for l in (0..params.n_layers()).rev() {
            let (fan_in, fan_out) = params.layer_dims(l);
            let input = &tape.inputs[l];
            gemm(
                1.0,
                input.as_slice(),
                (batch, fan_in),
                true,
                delta.as_slice(),
                (batch, fan_out),
                false,
                0.0,
                grads.weights_mut(l),
            );
            let db = grads.bias_mut(l);
            for row in delta.iter_rows() {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let mut d_input = Matrix::zeros(batch, fan_in);
            gemm(
                1.0,
                delta.as_slice(),
                (batch, fan_out),
                false,
                params.weights(l),
                (fan_in, fan_out),
                true,
                0.0,
                d_input.as_mut_slice(),
            );
            if l > 0 {
                if let Some(mask) = &tape.masks[l - 1] {
                    for (d, s) in d_input.as_mut_slice().iter_mut().zip(mask) {
                        *d *= s;
                    }
                }
                // relu'; a dropped unit has input 0 and a zeroed gradient already
                for (d, &h) in d_input.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = d_input;
        }
        Ok((grads, delta))
    }

    pub fn forward(&self, params: &ParamSet, input: &[f64], mode: Mode<'_>) -> Result<Vec<f64>> {
        let (out, _) = self.forward_batch(params, &Matrix::row_vector(input), mode)?;
        Ok(out.into_vec())
    }

    /// Single-sample backward pass; recomputes the forward pass in eval mode.
    pub fn backward(&self, params: &ParamSet, input: &[f64], upstream: &[f64]) -> Result<(ParamSet, Vec<f64>)> {
        let (_, tape) = self.forward_batch(params, &Matrix::row_vector(input), Mode::Eval)?;
        let (grads, d_input) = self.backward_batch(params, &tape, &Matrix::row_vector(upstream))?;
        Ok((grads, d_input.into_vec()))
    }
}
