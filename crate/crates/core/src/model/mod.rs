//! Feed-forward network producing `K - 1` logits, and its training loop.

mod adam;
mod checkpoint;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, FORMAT_VERSION,
};
pub use train::{train, EpochLog, Head, Standardizer, SurvModel, TrainConfig, TrainLog};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Affine layer `x -> x W + b` with `W` of shape `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weights: Array2::zeros((inputs, outputs)),
            biases: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// Hidden layers use `activation`; the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(
        inputs: usize,
        hidden: &[usize],
        outputs: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(inputs);
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-limit..=limit)
                    }),
                    biases: Array1::zeros(w[1]),
                }
            })
            .collect();
        ModelParams { layers, activation }
    }

    pub fn zeros(inputs: usize, hidden: &[usize], outputs: usize, activation: Activation) -> Self {
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        ModelParams {
            layers: widths
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("network has no layers"));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for layer in &self.layers {
            if layer.biases.len() != layer.outputs() {
                return Err(Error::shape("bias length differs from layer width"));
            }
            if layer
                .weights
                .iter()
                .chain(layer.biases.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Numerical("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::outputs)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Weights (row-major) then biases, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.biases.iter());
        }
        out
    }

    /// Inverse of [`ModelParams::to_flat`] onto this network's shapes.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = flat[pos];
                pos += 1;
            }
            for b in layer.biases.iter_mut() {
                *b = flat[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, features: &ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "features have {} columns, network expects {}",
                features.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits for each row of `features`.
    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&features)?;
        let last = self.layers.len() - 1;
        let mut h = features.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights) + &layer.biases;
            if l < last {
                h.mapv_inplace(|v| self.activation.apply(v));
            }
        }
        Ok(h)
    }

    /// Parameter gradients given `d(loss)/d(logits)`.
    pub fn backward(
        &self,
        features: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<Vec<Layer>> {
        self.check_input(&features)?;
        if upstream.dim() != (features.nrows(), self.output_dim()) {
            return Err(Error::shape(format!(
                "upstream gradient {:?}, expected ({}, {})",
                upstream.dim(),
                features.nrows(),
                self.output_dim()
            )));
        }
        let last = self.layers.len() - 1;
        // inputs[l] feeds layer l; pre[l] is its affine output
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = features.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weights) + &layer.biases;
            let next = if l < last {
                z.mapv(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            inputs.push(h);
            pre.push(z);
            h = next;
        }

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            grads.push(Layer {
                weights: inputs[l].t().dot(&delta),
                biases: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back.zip_mut_with(&pre[l - 1], |d, &z| *d *= self.activation.derivative(z));
                delta = back;
            }
        }
        grads.reverse();
        Ok(grads)
    }
}

/// Flattens gradients in the order of [`ModelParams::to_flat`].
pub fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        out.extend(layer.weights.iter());
        out.extend(layer.biases.iter());
    }
    out
}
