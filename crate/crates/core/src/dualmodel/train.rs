use serde::{Deserialize, Serialize};

use super::model::{DualModel, EncodedDomain, EncodedRecord};
use super::rating::{flatten_grads, RatingModel};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, sgd_step, LayerGrads, Matrix, Objective, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub tol: f64,
    pub lr_a: f64,
    pub lr_b: f64,
    /// Step size for the mapping matrix.
    pub lr_map: f64,
    pub batch_size: usize,
    /// Weight of `‖XᵀX − I‖²` in the training loss.
    pub penalty_weight: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 100,
            tol: 1e-5,
            lr_a: 0.01,
            lr_b: 0.01,
            lr_map: 0.01,
            batch_size: 32,
            penalty_weight: 1.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        for (name, v) in [("lr_a", self.lr_a), ("lr_b", self.lr_b), ("lr_map", self.lr_map)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return bad(format!("tol = {} must be >= 0", self.tol));
        }
        if !(self.penalty_weight.is_finite() && self.penalty_weight >= 0.0) {
            return bad(format!("penalty_weight = {} must be >= 0", self.penalty_weight));
        }
        Ok(())
    }

    /// Seed for the batch order of one epoch.
    pub fn epoch_seed(&self, epoch: usize) -> u64 {
        derive_seed(self.seed, &format!("epoch/{epoch}"))
    }
}

/// Per-domain epoch losses. `initial_*` is the full-data loss before training;
/// the epoch entries are the mean mini-batch loss seen during each pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub initial_a: f64,
    pub initial_b: f64,
    pub loss_a: Vec<f64>,
    pub loss_b: Vec<f64>,
    pub converged: bool,
}

impl FitTrace {
    pub fn epochs(&self) -> usize {
        self.loss_a.len()
    }

    pub fn combined(&self) -> Vec<f64> {
        self.loss_a.iter().zip(&self.loss_b).map(|(a, b)| a + b).collect()
    }
}

/// Gradients of the dual loss at one point.
#[derive(Debug, Clone)]
pub struct DualGrads {
    pub rs_a: Vec<LayerGrads>,
    pub rs_b: Vec<LayerGrads>,
    pub x: Matrix,
    pub loss_a: f64,
    pub loss_b: f64,
    pub penalty: f64,
}

/// The scorer that owns a batch, plus optionally the other domain's scorer and
/// the map used for its cross term.
struct CrossTerm<'a> {
    scorer: &'a RatingModel,
    grads: &'a mut [LayerGrads],
    x: &'a Matrix,
    /// `true` when the user is mapped by `Xᵀ` (domain B records).
    transpose: bool,
    dx: &'a mut Matrix,
    alpha: f64,
}

/// Squared-error loss of one batch and its gradients. With `cross = None` or a
/// zero transfer rate this is exactly single-domain training.
fn batch_gradient(
    own: &RatingModel,
    own_grads: &mut [LayerGrads],
    mut cross: Option<CrossTerm<'_>>,
    batch: &[&EncodedRecord],
) -> Result<f64> {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for rec in batch {
        let alpha = match &cross {
            Some(c) if rec.shared => c.alpha,
            _ => 0.0,
        };
        let (within, w_cache) = own.forward(&rec.user, &rec.item)?;
        let mut pred = within;
        let mut c_state = None;
        if alpha > 0.0 {
            let c = cross.as_ref().expect("alpha > 0 implies cross term");
            let mapped = if c.transpose {
                c.x.t_matvec(&rec.user)?
            } else {
                c.x.matvec(&rec.user)?
            };
            let (s, cache) = c.scorer.forward(&mapped, &rec.item)?;
            pred = (1.0 - alpha) * within + alpha * s;
            c_state = Some(cache);
        }
        let resid = pred - rec.rating;
        loss += resid * resid;
        let dl = 2.0 * resid / n;

        let g = own.backward(&w_cache, (1.0 - alpha) * dl)?;
        for (acc, gi) in own_grads.iter_mut().zip(&g.layers) {
            acc.accumulate(gi, 1.0);
        }
        if let Some(cache) = c_state {
            let c = cross.as_mut().expect("cross state");
            let g = c.scorer.backward(&cache, alpha * dl)?;
            for (acc, gi) in c.grads.iter_mut().zip(&g.layers) {
                acc.accumulate(gi, 1.0);
            }
            let d = rec.user.len();
            for r in 0..d {
                for k in 0..d {
                    // y = X·u gives dX = g·uᵀ; y = Xᵀ·u gives dX = u·gᵀ
                    c.dx[(r, k)] += if c.transpose {
                        rec.user[r] * g.d_user[k]
                    } else {
                        g.d_user[r] * rec.user[k]
                    };
                }
            }
        }
    }
    Ok(loss / n)
}

impl DualModel {
    /// Dual loss and gradients on one A batch and one B batch, evaluated at
    /// the current parameters. Either batch may be empty.
    pub fn dual_gradient(
        &self,
        batch_a: &[&EncodedRecord],
        batch_b: &[&EncodedRecord],
        penalty_weight: f64,
    ) -> Result<DualGrads> {
        let d = self.embed_dim();
        let mut ga = self.rs_a.zero_grads();
        let mut gb = self.rs_b.zero_grads();
        let mut dx = Matrix::zeros(d, d);
        let x = self.map.matrix();
        let mut loss_a = 0.0;
        let mut loss_b = 0.0;
        if !batch_a.is_empty() {
            let cross = CrossTerm {
                scorer: &self.rs_b,
                grads: &mut gb,
                x,
                transpose: false,
                dx: &mut dx,
                alpha: self.alpha(),
            };
            loss_a = batch_gradient(&self.rs_a, &mut ga, Some(cross), batch_a)?;
        }
        if !batch_b.is_empty() {
            let cross = CrossTerm {
                scorer: &self.rs_a,
                grads: &mut ga,
                x,
                transpose: true,
                dx: &mut dx,
                alpha: self.alpha(),
            };
            loss_b = batch_gradient(&self.rs_b, &mut gb, Some(cross), batch_b)?;
        }
        let (penalty, gp) = self.map.penalty();
        if penalty_weight != 0.0 {
            for (a, b) in dx.data_mut().iter_mut().zip(gp.data()) {
                *a += penalty_weight * b;
            }
        }
        Ok(DualGrads {
            rs_a: ga,
            rs_b: gb,
            x: dx,
            loss_a,
            loss_b,
            penalty,
        })
    }

    /// Mean squared error of each domain over all records.
    pub fn evaluate(&self, data_a: &EncodedDomain, data_b: &EncodedDomain) -> Result<(f64, f64)> {
        let mse = |side, data: &EncodedDomain| -> Result<f64> {
            if data.is_empty() {
                return Err(Error::Empty("evaluation records"));
            }
            let mut total = 0.0;
            for r in &data.records {
                let e = self.predict_record(side, r)? - r.rating;
                total += e * e;
            }
            Ok(total / data.len() as f64)
        };
        Ok((mse(super::Side::A, data_a)?, mse(super::Side::B, data_b)?))
    }

    /// One pass over both domains with interleaved mini-batches. Each step
    /// takes one A batch and one B batch, computes all gradients at the
    /// current parameters and then updates RS_A, RS_B and `X` together. `X` is
    /// projected back onto the orthogonal group at the end of the pass.
    ///
    /// Returns the mean batch loss of each domain.
    pub fn train_epoch(
        &mut self,
        data_a: &EncodedDomain,
        data_b: &EncodedDomain,
        config: &FitConfig,
        seed: u64,
    ) -> Result<(f64, f64)> {
        config.validate()?;
        if data_a.is_empty() || data_b.is_empty() {
            return Err(Error::Empty("training records"));
        }
        let order_a = batch_order(data_a, config.batch_size, seed);
        let order_b = batch_order(data_b, config.batch_size, seed);
        let steps = order_a.len().max(order_b.len());
        let (mut sum_a, mut sum_b) = (0.0, 0.0);
        for step in 0..steps {
            let batch_a = pick(&order_a, step, data_a);
            let batch_b = pick(&order_b, step, data_b);
            let g = self.dual_gradient(&batch_a, &batch_b, config.penalty_weight)?;
            if !(g.loss_a.is_finite() && g.loss_b.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss at step {step} (A {}, B {}); lower lr_a={} / lr_b={}",
                    g.loss_a, g.loss_b, config.lr_a, config.lr_b
                )));
            }
            sum_a += g.loss_a;
            sum_b += g.loss_b;
            self.rs_a.step(&g.rs_a, config.lr_a).map_err(diverged)?;
            self.rs_b.step(&g.rs_b, config.lr_b).map_err(diverged)?;
            sgd_step(self.map.matrix_mut().data_mut(), g.x.data(), config.lr_map).map_err(diverged)?;
        }
        self.map = self.map.project()?;
        Ok((sum_a / order_a.len() as f64, sum_b / order_b.len() as f64))
    }

    /// Repeats [`train_epoch`](Self::train_epoch) until the epoch budget runs
    /// out or the combined loss changes by less than `tol` between epochs. The
    /// first epoch is compared with the full-data loss before training.
    pub fn fit(&mut self, data_a: &EncodedDomain, data_b: &EncodedDomain, config: &FitConfig) -> Result<FitTrace> {
        config.validate()?;
        let (initial_a, initial_b) = self.evaluate(data_a, data_b)?;
        let mut trace = FitTrace {
            initial_a,
            initial_b,
            loss_a: Vec::new(),
            loss_b: Vec::new(),
            converged: false,
        };
        let mut prev = initial_a + initial_b;
        for epoch in 0..config.epochs {
            let (la, lb) = self.train_epoch(data_a, data_b, config, config.epoch_seed(epoch))?;
            log::debug!("epoch {epoch}: loss A {la:.6} B {lb:.6}");
            trace.loss_a.push(la);
            trace.loss_b.push(lb);
            let combined = la + lb;
            if (combined - prev).abs() < config.tol {
                trace.converged = true;
                break;
            }
            prev = combined;
        }
        log::info!(
            "fit stopped after {} epochs (converged: {})",
            trace.epochs(),
            trace.converged
        );
        Ok(trace)
    }
}

fn pick<'a>(order: &[Vec<usize>], step: usize, data: &'a EncodedDomain) -> Vec<&'a EncodedRecord> {
    order
        .get(step)
        .map(|idx| idx.iter().map(|&i| &data.records[i]).collect())
        .unwrap_or_default()
}

fn diverged(e: Error) -> Error {
    Error::Diverged(format!("parameter update failed: {e}; lower the learning rate"))
}

/// Shuffled mini-batches of one domain. The stream is keyed by the domain name,
/// so batch order does not depend on which slot the domain occupies.
fn batch_order(data: &EncodedDomain, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = SeededRng::new(seed).fork(&format!("batches/{}", data.name));
    let order = rng.permutation(data.len());
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Trains one scorer on one domain alone, using the same batch streams and
/// stopping rule as [`DualModel::fit`] with `lr_a` as the step size.
pub fn fit_single(model: &mut RatingModel, data: &EncodedDomain, config: &FitConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training records"));
    }
    let mse = |m: &RatingModel| -> Result<f64> {
        let mut total = 0.0;
        for r in &data.records {
            let e = m.score(&r.user, &r.item)? - r.rating;
            total += e * e;
        }
        Ok(total / data.len() as f64)
    };
    let mut prev = mse(model)?;
    let mut trace = Vec::new();
    for epoch in 0..config.epochs {
        let order = batch_order(data, config.batch_size, config.epoch_seed(epoch));
        let mut sum = 0.0;
        for idx in &order {
            let batch: Vec<&EncodedRecord> = idx.iter().map(|&i| &data.records[i]).collect();
            let mut grads = model.zero_grads();
            let loss = batch_gradient(model, &mut grads, None, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss in epoch {epoch}; lower lr={}",
                    config.lr_a
                )));
            }
            sum += loss;
            model.step(&grads, config.lr_a).map_err(diverged)?;
        }
        let epoch_loss = sum / order.len() as f64;
        trace.push(epoch_loss);
        if (epoch_loss - prev).abs() < config.tol {
            break;
        }
        prev = epoch_loss;
    }
    Ok(trace)
}

/// The full dual loss `L_A + L_B + λ‖XᵀX − I‖²` over two record sets, as a
/// function of RS_A, RS_B and `X`.
pub struct DualObjective<'a> {
    pub model: DualModel,
    pub data_a: &'a EncodedDomain,
    pub data_b: &'a EncodedDomain,
    pub penalty_weight: f64,
}

impl DualObjective<'_> {
    fn grads(&self) -> DualGrads {
        let a: Vec<&EncodedRecord> = self.data_a.records.iter().collect();
        let b: Vec<&EncodedRecord> = self.data_b.records.iter().collect();
        self.model
            .dual_gradient(&a, &b, self.penalty_weight)
            .expect("record shapes")
    }
}

impl Objective for DualObjective<'_> {
    fn params(&self) -> Vec<f64> {
        let mut p = self.model.rs_a.params();
        p.extend(self.model.rs_b.params());
        p.extend_from_slice(self.model.map.matrix().data());
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let na = self.model.rs_a.num_params();
        let nb = self.model.rs_b.num_params();
        self.model.rs_a.set_params(&p[..na]);
        self.model.rs_b.set_params(&p[na..na + nb]);
        self.model.map.matrix_mut().data_mut().copy_from_slice(&p[na + nb..]);
    }

    fn loss(&self) -> f64 {
        let g = self.grads();
        g.loss_a + g.loss_b + self.penalty_weight * g.penalty
    }

    fn gradient(&self) -> Vec<f64> {
        let g = self.grads();
        let mut out = flatten_grads(&g.rs_a);
        out.extend(flatten_grads(&g.rs_b));
        out.extend_from_slice(g.x.data());
        out
    }
}
