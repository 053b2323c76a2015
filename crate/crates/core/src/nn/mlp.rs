use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::kernels::{axpy, dot};
use crate::error::{shape_check, Error, Result};
use crate::rng;

/// Constant added to `softplus` by [`OutputActivation::SoftplusFloored`].
pub const SIGMA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub(crate) fn id(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Relu),
            _ => Err(Error::Format(format!("unknown activation id {id}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `softplus(x) + SIGMA_FLOOR`; keeps every output strictly positive.
    SoftplusFloored,
}

impl OutputActivation {
    pub(crate) fn id(self) -> u8 {
        match self {
            OutputActivation::Identity => 0,
            OutputActivation::SoftplusFloored => 1,
        }
    }

    pub(crate) fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(OutputActivation::Identity),
            1 => Ok(OutputActivation::SoftplusFloored),
            _ => Err(Error::Format(format!("unknown output activation id {id}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
    output_activation: OutputActivation,
}

impl NetworkSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Shape(format!(
                "network needs at least an input and an output size, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Shape(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
            output_activation,
        })
    }

    /// `input`, then each hidden width, then `output`.
    pub fn with_hidden(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, activation, output_activation)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weight_offset, bias_offset, fan_in, fan_out)` for each layer.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let w_off = offset;
            let b_off = w_off + fan_in * fan_out;
            offset = b_off + fan_out;
            (w_off, b_off, fan_in, fan_out)
        })
    }
}

/// Flat parameter storage in the layer-major layout described in [`super`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            values: vec![0.0; spec.param_count()],
        }
    }

    pub fn from_vec(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        shape_check("parameter vector", spec.param_count(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
pub fn seeded_init(spec: &NetworkSpec, seed: u64) -> ParamVector {
    let mut rng = rng::seeded(seed);
    let mut values = vec![0.0; spec.param_count()];
    for (w_off, b_off, fan_in, _) in spec.layers() {
        let scale = 1.0 / (fan_in as f64).sqrt();
        for w in &mut values[w_off..b_off] {
            *w = scale * rng.random_range(-1.0..1.0);
        }
    }
    ParamVector { values }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[0]` is the input; `acts[l + 1]` the (post-activation) output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Output-layer pre-activations (needed for the softplus derivative).
    out_pre: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.acts.pop().unwrap()
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn forward_tape_unchecked(spec: &NetworkSpec, params: &[f64], input: &[f64]) -> Tape {
    let n_layers = spec.n_layers();
    let mut acts = Vec::with_capacity(n_layers + 1);
    acts.push(input.to_vec());
    let mut out_pre = Vec::new();
    for (l, (w_off, b_off, fan_in, fan_out)) in spec.layers().enumerate() {
        let x = &acts[l];
        let weights = &params[w_off..b_off];
        let biases = &params[b_off..b_off + fan_out];
        let mut y: Vec<f64> = (0..fan_out)
            .map(|o| biases[o] + dot(&weights[o * fan_in..(o + 1) * fan_in], x))
            .collect();
        if l + 1 < n_layers {
            match spec.activation {
                Activation::Tanh => y.iter_mut().for_each(|v| *v = v.tanh()),
                Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(0.0)),
            }
        } else if spec.output_activation == OutputActivation::SoftplusFloored {
            out_pre = y.clone();
            y.iter_mut().for_each(|v| *v = softplus(*v) + SIGMA_FLOOR);
        }
        acts.push(y);
    }
    Tape { acts, out_pre }
}

fn check_inputs(spec: &NetworkSpec, params: &[f64], input: &[f64]) -> Result<()> {
    shape_check("parameter vector", spec.param_count(), params.len())?;
    shape_check("network input", spec.input_dim(), input.len())?;
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("network input {i} is not finite")));
    }
    Ok(())
}

/// Accumulates the parameter gradient of `<output, output_grad>` into
/// `param_grad` and returns the input gradient.
fn backward_tape_unchecked(
    spec: &NetworkSpec,
    params: &[f64],
    tape: &Tape,
    output_grad: &[f64],
    param_grad: &mut [f64],
) -> Vec<f64> {
    let layers: Vec<_> = spec.layers().collect();
    let n_layers = layers.len();
    let mut delta = output_grad.to_vec();
    if spec.output_activation == OutputActivation::SoftplusFloored {
        for (d, &pre) in delta.iter_mut().zip(&tape.out_pre) {
            *d *= sigmoid(pre);
        }
    }
    for l in (0..n_layers).rev() {
        let (w_off, b_off, fan_in, fan_out) = layers[l];
        let x = &tape.acts[l];
        let (gw, gb) = param_grad[w_off..b_off + fan_out].split_at_mut(b_off - w_off);
        let weights = &params[w_off..b_off];
        let mut dx = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            axpy(d, x, &mut gw[o * fan_in..(o + 1) * fan_in]);
            axpy(d, &weights[o * fan_in..(o + 1) * fan_in], &mut dx);
        }
        if l > 0 {
            match spec.activation {
                Activation::Tanh => {
                    for (g, &a) in dx.iter_mut().zip(x) {
                        *g *= 1.0 - a * a;
                    }
                }
                Activation::Relu => {
                    for (g, &a) in dx.iter_mut().zip(x) {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
        }
        delta = dx;
    }
    delta
}

pub fn forward(spec: &NetworkSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    check_inputs(spec, params.as_slice(), input)?;
    Ok(forward_tape_unchecked(spec, params.as_slice(), input).into_output())
}

/// Exact gradients of `<forward(input), output_grad>` with respect to the
/// parameters and the input.
pub fn backward(
    spec: &NetworkSpec,
    params: &ParamVector,
    input: &[f64],
    output_grad: &[f64],
) -> Result<(ParamVector, Vec<f64>)> {
    check_inputs(spec, params.as_slice(), input)?;
    shape_check("output gradient", spec.output_dim(), output_grad.len())?;
    let tape = forward_tape_unchecked(spec, params.as_slice(), input);
    let mut grad = vec![0.0; spec.param_count()];
    let input_grad = backward_tape_unchecked(spec, params.as_slice(), &tape, output_grad, &mut grad);
    Ok((ParamVector { values: grad }, input_grad))
}

/// A network spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: NetworkSpec,
    params: ParamVector,
}

impl Mlp {
    pub fn new(spec: NetworkSpec, params: ParamVector) -> Result<Self> {
        shape_check("parameter vector", spec.param_count(), params.len())?;
        Ok(Self { spec, params })
    }

    pub fn seeded(spec: NetworkSpec, seed: u64) -> Self {
        let params = seeded_init(&spec, seed);
        Self { spec, params }
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let params = ParamVector::zeros(&spec);
        Self { spec, params }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.params.as_mut_slice()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        forward(&self.spec, &self.params, input)
    }

    pub fn forward_tape(&self, input: &[f64]) -> Result<Tape> {
        check_inputs(&self.spec, self.params.as_slice(), input)?;
        Ok(forward_tape_unchecked(&self.spec, self.params.as_slice(), input))
    }

    /// Accumulates `d<output, output_grad>/dparams` into `param_grad`;
    /// returns the input gradient.
    pub fn backward_tape(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        param_grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        shape_check("output gradient", self.spec.output_dim(), output_grad.len())?;
        shape_check("parameter gradient", self.param_count(), param_grad.len())?;
        shape_check("tape input", self.spec.input_dim(), tape.input().len())?;
        Ok(backward_tape_unchecked(
            &self.spec,
            self.params.as_slice(),
            tape,
            output_grad,
            param_grad,
        ))
    }

    /// Zeroes the output layer's weight matrix, making the output constant
    /// (equal to the activated output bias) at initialization.
    pub fn zero_output_weights(&mut self) {
        let (w_off, b_off, _, _) = self.spec.layers().last().unwrap();
        self.params.as_mut_slice()[w_off..b_off].fill(0.0);
    }

    /// Sets every bias of the output layer to `value`.
    pub fn set_output_bias(&mut self, value: f64) {
        let (_, b_off, _, fan_out) = self.spec.layers().last().unwrap();
        self.params.as_mut_slice()[b_off..b_off + fan_out].fill(value);
    }
}
