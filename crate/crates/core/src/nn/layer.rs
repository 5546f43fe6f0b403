use serde::{Deserialize, Serialize};

use super::error::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine map followed by an activation and, in training mode, inverted dropout
/// on the layer output.
///
/// Weights are row-major with shape `(out_dim, in_dim)`. The flat parameter
/// layout is all weights followed by all biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
    dropout: f64,
}

impl DenseLayer {
    /// Zero-initialized layer.
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, dropout: f64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(NnError::Config(format!(
                "layer dims must be positive, got {in_dim}->{out_dim}"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(NnError::Config(format!("dropout rate {dropout} outside [0, 1)")));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
            dropout,
        })
    }

    pub fn with_params(mut self, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != self.in_dim * self.out_dim || bias.len() != self.out_dim {
            return Err(NnError::Config(format!(
                "parameter shapes ({}, {}) do not fit a {}->{} layer",
                weights.len(),
                bias.len(),
                self.in_dim,
                self.out_dim
            )));
        }
        self.weights = weights;
        self.bias = bias;
        Ok(self)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        self.dropout = rate;
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn parameter_count(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }

    /// Pre-activation for one input row.
    #[inline]
    pub(crate) fn affine_into(&self, x: &[f64], z: &mut [f64]) {
        for (o, zo) in z.iter_mut().enumerate() {
            let w = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *zo = acc + self.bias[o];
        }
    }

    pub(crate) fn write_params(&self, out: &mut [f64]) {
        let nw = self.weights.len();
        out[..nw].copy_from_slice(&self.weights);
        out[nw..nw + self.out_dim].copy_from_slice(&self.bias);
    }

    pub(crate) fn read_params(&mut self, src: &[f64]) {
        let nw = self.weights.len();
        self.weights.copy_from_slice(&src[..nw]);
        self.bias.copy_from_slice(&src[nw..nw + self.out_dim]);
    }
}
