//! One-layer feature autoencoders.
//!
//! One autoencoder is trained per (domain, entity type) on that corpus alone,
//! so no information crosses domains at this stage. The encoder is a sigmoid
//! layer (bounded embeddings), the decoder an identity layer, and the loss is
//! the mean squared L2 reconstruction error.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Activation, DenseLayer, LayerGrads, Objective, SeededRng};
use crate::persist;

pub const DEFAULT_EMBED_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entity {
    User,
    Item,
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Entity::User => "user",
            Entity::Item => "item",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub embed_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            embed_dim: DEFAULT_EMBED_DIM,
            lr: 0.01,
            epochs: 200,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    encoder: DenseLayer,
    decoder: DenseLayer,
    embed_dim: usize,
    domain: String,
    entity: Entity,
    trained: bool,
}

impl Autoencoder {
    /// Freshly initialized (untrained) autoencoder.
    pub fn new(input_dim: usize, embed_dim: usize, domain: &str, entity: Entity, rng: &mut SeededRng) -> Result<Self> {
        if embed_dim == 0 {
            return Err(Error::InvalidConfig("embed_dim must be >= 1".into()));
        }
        if embed_dim > input_dim {
            return Err(Error::InvalidConfig(format!(
                "embed_dim {embed_dim} exceeds input dimension {input_dim}; no bottleneck"
            )));
        }
        Ok(Autoencoder {
            encoder: DenseLayer::xavier(input_dim, embed_dim, Activation::Sigmoid, rng),
            decoder: DenseLayer::xavier(embed_dim, input_dim, Activation::Identity, rng),
            embed_dim,
            domain: domain.to_string(),
            entity,
            trained: false,
        })
    }

    /// Wraps already-trained layers. The encoder must map into the decoder's
    /// input space and back out to the encoder's input width.
    pub fn from_layers(encoder: DenseLayer, decoder: DenseLayer, domain: &str, entity: Entity) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "Autoencoder::from_layers",
                left: encoder.weights.shape(),
                right: decoder.weights.shape(),
            });
        }
        Ok(Autoencoder {
            embed_dim: encoder.output_dim(),
            encoder,
            decoder,
            domain: domain.to_string(),
            entity,
            trained: true,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn entity(&self) -> Entity {
        self.entity
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn encoder(&self) -> &DenseLayer {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseLayer {
        &self.decoder
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::Model(format!(
                "{} {} autoencoder has not been trained",
                self.domain, self.entity
            )));
        }
        self.encoder.apply(v)
    }

    pub fn decode(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.decoder.apply(e)
    }

    /// `‖v − dec(enc(v))‖²` without the trained-flag check.
    fn sample_loss(&self, v: &[f64]) -> Result<f64> {
        let h = self.encoder.apply(v)?;
        let y = self.decoder.apply(&h)?;
        Ok(v.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// Mean squared reconstruction error over `vectors`.
    pub fn reconstruction_loss(&self, vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.is_empty() {
            return Err(Error::Empty("autoencoder corpus"));
        }
        let mut total = 0.0;
        for v in vectors {
            total += self.sample_loss(v)?;
        }
        Ok(total / vectors.len() as f64)
    }

    /// Gradient of the mean loss over `batch`, as (encoder, decoder) grads.
    fn batch_gradient(&self, batch: &[&[f64]]) -> Result<(LayerGrads, LayerGrads)> {
        let mut g_enc = LayerGrads::zeros_like(&self.encoder);
        let mut g_dec = LayerGrads::zeros_like(&self.decoder);
        let scale = 1.0 / batch.len() as f64;
        for v in batch {
            let (h, c_enc) = self.encoder.forward(v)?;
            let (y, c_dec) = self.decoder.forward(&h)?;
            let dy: Vec<f64> = y.iter().zip(v.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
            let gd = self.decoder.backward(&c_dec, &dy)?;
            let ge = self.encoder.backward(&c_enc, &gd.dx)?;
            g_dec.accumulate(&gd, scale);
            g_enc.accumulate(&ge, scale);
        }
        Ok((g_enc, g_dec))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::save(path, "autoencoder", self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::load(path, "autoencoder")
    }
}

/// Trains an autoencoder on one (domain, entity) corpus by mini-batch gradient
/// descent. Returns the model and the full-corpus loss after every epoch.
pub fn train_autoencoder(
    vectors: &[Vec<f64>],
    config: &AutoencoderConfig,
    domain: &str,
    entity: Entity,
) -> Result<(Autoencoder, Vec<f64>)> {
    let first = vectors.first().ok_or(Error::Empty("autoencoder corpus"))?;
    let input_dim = first.len();
    if let Some(bad) = vectors.iter().position(|v| v.len() != input_dim) {
        return Err(Error::DimensionMismatch {
            op: "train_autoencoder",
            left: (1, input_dim),
            right: (bad, vectors[bad].len()),
        });
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let root = SeededRng::new(config.seed);
    let mut ae = Autoencoder::new(input_dim, config.embed_dim, domain, entity, &mut root.fork("init"))?;
    let mut order_rng = root.fork("shuffle");
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order_rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| vectors[i].as_slice()).collect();
            let (g_enc, g_dec) = ae.batch_gradient(&batch)?;
            ae.encoder.step(&g_enc, config.lr)?;
            ae.decoder.step(&g_dec, config.lr)?;
        }
        let loss = ae.reconstruction_loss(vectors)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "{domain} {entity} autoencoder loss non-finite at epoch {epoch}"
            )));
        }
        trace.push(loss);
    }
    ae.trained = true;
    Ok((ae, trace))
}

/// Mean reconstruction loss over a corpus as a function of all encoder and
/// decoder parameters.
pub struct ReconstructionObjective<'a> {
    pub ae: Autoencoder,
    pub vectors: &'a [Vec<f64>],
}

impl Objective for ReconstructionObjective<'_> {
    fn params(&self) -> Vec<f64> {
        let mut p = self.ae.encoder.params();
        p.extend(self.ae.decoder.params());
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let n = self.ae.encoder.num_params();
        self.ae.encoder.set_params(&p[..n]);
        self.ae.decoder.set_params(&p[n..]);
    }

    fn loss(&self) -> f64 {
        self.ae.reconstruction_loss(self.vectors).expect("corpus shape")
    }

    fn gradient(&self) -> Vec<f64> {
        let batch: Vec<&[f64]> = self.vectors.iter().map(Vec::as_slice).collect();
        let (ge, gd) = self.ae.batch_gradient(&batch).expect("corpus shape");
        let mut g = ge.flatten();
        g.extend(gd.flatten());
        g
    }
}
