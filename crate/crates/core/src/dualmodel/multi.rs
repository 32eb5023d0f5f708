use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{check_alpha, DualModel};
use super::rating::RatingModel;
use crate::error::{Error, Result};
use crate::mapping::OrthogonalMap;

/// Rating models for `n ≥ 2` domains with one orthogonal map per unordered
/// pair.
///
/// The map stored under `(j, k)` with `j < k` sends domain `j` user embeddings
/// into domain `k`'s space; the reverse direction uses its transpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiModel {
    names: Vec<String>,
    models: Vec<RatingModel>,
    maps: BTreeMap<(usize, usize), OrthogonalMap>,
    alpha: f64,
}

impl MultiModel {
    pub fn new(
        names: Vec<String>,
        models: Vec<RatingModel>,
        maps: BTreeMap<(usize, usize), OrthogonalMap>,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let n = models.len();
        if n < 2 || names.len() != n {
            return Err(Error::InvalidConfig(format!(
                "need at least two domains with one name each, got {n} models and {} names",
                names.len()
            )));
        }
        let d = models[0].embed_dim();
        if models.iter().any(|m| m.embed_dim() != d) {
            return Err(Error::InvalidConfig("all scorers must share one embedding size".into()));
        }
        for j in 0..n {
            for k in j + 1..n {
                match maps.get(&(j, k)) {
                    Some(m) if m.dim() == d => {}
                    Some(m) => {
                        return Err(Error::InvalidConfig(format!(
                            "map ({j}, {k}) has dimension {} instead of {d}",
                            m.dim()
                        )))
                    }
                    None => return Err(Error::InvalidConfig(format!("missing map for domains ({j}, {k})"))),
                }
            }
        }
        if maps.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidConfig(
                "maps must be keyed by (j, k) with j < k, once per pair".into(),
            ));
        }
        Ok(MultiModel {
            names,
            models,
            maps,
            alpha,
        })
    }

    /// The two-domain special case.
    pub fn from_dual(dm: &DualModel) -> Self {
        let names = vec![
            dm.domain_name(super::Side::A).to_string(),
            dm.domain_name(super::Side::B).to_string(),
        ];
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), dm.map.clone());
        MultiModel {
            names,
            models: vec![dm.rs_a.clone(), dm.rs_b.clone()],
            maps,
            alpha: dm.alpha(),
        }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn model(&self, k: usize) -> Option<&RatingModel> {
        self.models.get(k)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    /// `X_jk · u`: a domain `k` user embedding expressed in domain `j`'s space.
    pub fn map_into(&self, j: usize, k: usize, user: &[f64]) -> Result<Vec<f64>> {
        if k < j {
            self.maps[&(k, j)].forward(user)
        } else {
            self.maps[&(j, k)].inverse(user)
        }
    }

    /// `(1−α)·RS_k(u, i) + α/(n−1)·Σ_{j≠k} RS_j(X_jk·u, i)`.
    pub fn predict_multi(&self, k: usize, user: &[f64], item: &[f64]) -> Result<f64> {
        let own = self
            .models
            .get(k)
            .ok_or_else(|| Error::UnknownDomain(format!("domain index {k} (have {})", self.len())))?;
        let within = own.score(user, item)?;
        if self.alpha == 0.0 {
            return Ok(within);
        }
        let mut cross: Option<f64> = None;
        for (j, model) in self.models.iter().enumerate() {
            if j == k {
                continue;
            }
            let s = model.score(&self.map_into(j, k, user)?, item)?;
            cross = Some(cross.map_or(s, |acc| acc + s));
        }
        let weight = self.alpha / (self.len() - 1) as f64;
        Ok((1.0 - self.alpha) * within + weight * cross.expect("n >= 2"))
    }
}
