use serde::{Deserialize, Serialize};

use super::{Matrix, SeededRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
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

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer `y = act(W x + b)` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values retained by [`DenseLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub dx: Vec<f64>,
    pub dw: Matrix,
    pub db: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                op: "DenseLayer::new",
                left: weights.shape(),
                right: (bias.len(), 1),
            });
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(input: usize, output: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights = Matrix::from_fn(output, input, |_, _| rng.uniform(-limit, limit));
        DenseLayer {
            weights,
            bias: vec![0.0; output],
            activation,
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, LayerCache)> {
        let mut z = self.weights.matvec(x)?;
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        let y: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer forward".into()));
        }
        Ok((
            y,
            LayerCache {
                input: x.to_vec(),
                pre_activation: z,
            },
        ))
    }

    /// Output only, no cache.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|(y, _)| y)
    }

    pub fn backward(&self, cache: &LayerCache, dy: &[f64]) -> Result<LayerGrads> {
        if dy.len() != self.output_dim()
            || cache.pre_activation.len() != self.output_dim()
            || cache.input.len() != self.input_dim()
        {
            return Err(Error::DimensionMismatch {
                op: "layer_backward",
                left: self.weights.shape(),
                right: (dy.len(), cache.input.len()),
            });
        }
        let dz: Vec<f64> = dy
            .iter()
            .zip(&cache.pre_activation)
            .map(|(&g, &z)| g * self.activation.derivative(z))
            .collect();
        let dx = self.weights.t_matvec(&dz)?;
        let dw = Matrix::from_fn(self.output_dim(), self.input_dim(), |i, j| dz[i] * cache.input[j]);
        Ok(LayerGrads { dx, dw, db: dz })
    }

    pub fn num_params(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    /// Weights (row-major) followed by bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.data().to_vec();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let nw = self.weights.data().len();
        self.weights.data_mut().copy_from_slice(&p[..nw]);
        let nb = self.bias.len();
        self.bias.copy_from_slice(&p[nw..nw + nb]);
    }

    /// Applies `p ← p − lr·g` to weights and bias.
    pub fn step(&mut self, grads: &LayerGrads, lr: f64) -> Result<()> {
        sgd_step(self.weights.data_mut(), grads.dw.data(), lr)?;
        sgd_step(&mut self.bias, &grads.db, lr)
    }
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrads {
            dx: vec![0.0; layer.input_dim()],
            dw: Matrix::zeros(layer.output_dim(), layer.input_dim()),
            db: vec![0.0; layer.output_dim()],
        }
    }

    /// Accumulates `scale · other` into the parameter gradients (dx is left alone).
    pub fn accumulate(&mut self, other: &LayerGrads, scale: f64) {
        for (a, b) in self.dw.data_mut().iter_mut().zip(other.dw.data()) {
            *a += scale * b;
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            *a += scale * b;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut g = self.dw.data().to_vec();
        g.extend_from_slice(&self.db);
        g
    }
}

/// Plain gradient descent: `p ← p − lr·g` elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::DimensionMismatch {
            op: "sgd_step",
            left: (params.len(), 1),
            right: (grads.len(), 1),
        });
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be finite and >= 0, got {lr}"
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i}")));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}
