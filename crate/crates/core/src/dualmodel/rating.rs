use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Activation, DenseLayer, LayerCache, LayerGrads, SeededRng};

/// Hidden layer widths of the rating network.
pub const HIDDEN_UNITS: [usize; 2] = [16, 8];

/// Neural scorer over a concatenated (user, item) embedding pair.
///
/// `2d → 16 relu → 8 relu → 1 sigmoid`, so scores lie in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingModel {
    layers: Vec<DenseLayer>,
}

pub struct RatingCache {
    layers: Vec<LayerCache>,
}

/// Parameter gradients of a [`RatingModel`] plus the gradients with respect to
/// its two inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingGrads {
    pub layers: Vec<LayerGrads>,
    pub d_user: Vec<f64>,
    pub d_item: Vec<f64>,
}

impl RatingModel {
    pub fn new(embed_dim: usize, rng: &mut SeededRng) -> Self {
        let [h1, h2] = HIDDEN_UNITS;
        RatingModel {
            layers: vec![
                DenseLayer::xavier(2 * embed_dim, h1, Activation::Relu, rng),
                DenseLayer::xavier(h1, h2, Activation::Relu, rng),
                DenseLayer::xavier(h2, 1, Activation::Sigmoid, rng),
            ],
        }
    }

    /// Builds a scorer from explicit layers. The chain must be consistent, start
    /// from an even width and end in a single sigmoid unit.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("rating model layers"))?;
        let last = layers.last().expect("non-empty");
        if first.input_dim() % 2 != 0 || last.output_dim() != 1 || last.activation != Activation::Sigmoid {
            return Err(Error::Model(
                "rating model needs an even input width and a single sigmoid output".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    op: "RatingModel::from_layers",
                    left: pair[0].weights.shape(),
                    right: pair[1].weights.shape(),
                });
            }
        }
        Ok(RatingModel { layers })
    }

    pub fn embed_dim(&self) -> usize {
        self.layers[0].input_dim() / 2
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    fn input(&self, user: &[f64], item: &[f64]) -> Result<Vec<f64>> {
        let d = self.embed_dim();
        if user.len() != d || item.len() != d {
            return Err(Error::DimensionMismatch {
                op: "RatingModel::score",
                left: (d, d),
                right: (user.len(), item.len()),
            });
        }
        let mut x = Vec::with_capacity(2 * d);
        x.extend_from_slice(user);
        x.extend_from_slice(item);
        Ok(x)
    }

    pub fn score(&self, user: &[f64], item: &[f64]) -> Result<f64> {
        let mut h = self.input(user, item)?;
        for layer in &self.layers {
            h = layer.apply(&h)?;
        }
        Ok(h[0])
    }

    pub fn forward(&self, user: &[f64], item: &[f64]) -> Result<(f64, RatingCache)> {
        let mut h = self.input(user, item)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward(&h)?;
            caches.push(cache);
            h = y;
        }
        Ok((h[0], RatingCache { layers: caches }))
    }

    /// Backpropagates `d loss / d score`.
    pub fn backward(&self, cache: &RatingCache, d_score: f64) -> Result<RatingGrads> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dy = vec![d_score];
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let g = layer.backward(c, &dy)?;
            dy = g.dx.clone();
            grads.push(g);
        }
        grads.reverse();
        let d = self.embed_dim();
        let d_item = dy.split_off(d);
        Ok(RatingGrads {
            layers: grads,
            d_user: dy,
            d_item,
        })
    }

    pub fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers.iter().map(LayerGrads::zeros_like).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(DenseLayer::params).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.num_params();
            layer.set_params(&p[offset..offset + n]);
            offset += n;
        }
    }

    pub fn step(&mut self, grads: &[LayerGrads], lr: f64) -> Result<()> {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.step(g, lr)?;
        }
        Ok(())
    }
}

pub fn flatten_grads(grads: &[LayerGrads]) -> Vec<f64> {
    grads.iter().flat_map(LayerGrads::flatten).collect()
}

/// Mean squared error of one scorer over `(user, item, rating)` triples.
pub struct ScorerObjective<'a> {
    pub model: RatingModel,
    pub samples: &'a [(Vec<f64>, Vec<f64>, f64)],
}

impl crate::numeric::Objective for ScorerObjective<'_> {
    fn params(&self) -> Vec<f64> {
        self.model.params()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.model.set_params(p);
    }

    fn loss(&self) -> f64 {
        let total: f64 = self
            .samples
            .iter()
            .map(|(u, i, r)| {
                let s = self.model.score(u, i).expect("sample shape");
                (s - r) * (s - r)
            })
            .sum();
        total / self.samples.len() as f64
    }

    fn gradient(&self) -> Vec<f64> {
        let mut acc = self.model.zero_grads();
        let scale = 1.0 / self.samples.len() as f64;
        for (u, i, r) in self.samples {
            let (s, cache) = self.model.forward(u, i).expect("sample shape");
            let g = self.model.backward(&cache, 2.0 * (s - r)).expect("sample shape");
            for (a, b) in acc.iter_mut().zip(&g.layers) {
                a.accumulate(b, scale);
            }
        }
        flatten_grads(&acc)
    }
}
