use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rating::RatingModel;
use crate::autoencoder::{train_autoencoder, Autoencoder, AutoencoderConfig, Entity};
use crate::error::{Error, Result};
use crate::features::{DomainDataset, FeatureSchema};
use crate::mapping::OrthogonalMap;
use crate::numeric::{derive_seed, SeededRng};
use crate::persist;

/// Position of a domain within a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// The four frozen feature autoencoders of a domain pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoders {
    pub user_a: Autoencoder,
    pub item_a: Autoencoder,
    pub user_b: Autoencoder,
    pub item_b: Autoencoder,
}

/// Per-epoch reconstruction losses of the four autoencoders.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EncoderTraces {
    pub user_a: Vec<f64>,
    pub item_a: Vec<f64>,
    pub user_b: Vec<f64>,
    pub item_b: Vec<f64>,
}

impl Encoders {
    pub fn new(user_a: Autoencoder, item_a: Autoencoder, user_b: Autoencoder, item_b: Autoencoder) -> Result<Self> {
        let d = user_a.embed_dim();
        for ae in [&item_a, &user_b, &item_b] {
            if ae.embed_dim() != d {
                return Err(Error::InvalidConfig(format!(
                    "all autoencoders must share one embedding size; {} {} has {} vs {d}",
                    ae.domain(),
                    ae.entity(),
                    ae.embed_dim()
                )));
            }
        }
        Ok(Encoders {
            user_a,
            item_a,
            user_b,
            item_b,
        })
    }

    /// Trains one autoencoder per (domain, entity) on that corpus alone.
    pub fn train(a: &DomainDataset, b: &DomainDataset, config: &AutoencoderConfig) -> Result<(Self, EncoderTraces)> {
        let ((user_a, tua), (item_a, tia)) = train_domain_encoders(a, config)?;
        let ((user_b, tub), (item_b, tib)) = train_domain_encoders(b, config)?;
        let traces = EncoderTraces {
            user_a: tua,
            item_a: tia,
            user_b: tub,
            item_b: tib,
        };
        Ok((Encoders::new(user_a, item_a, user_b, item_b)?, traces))
    }

    pub fn embed_dim(&self) -> usize {
        self.user_a.embed_dim()
    }

    pub fn user(&self, side: Side) -> &Autoencoder {
        match side {
            Side::A => &self.user_a,
            Side::B => &self.user_b,
        }
    }

    pub fn item(&self, side: Side) -> &Autoencoder {
        match side {
            Side::A => &self.item_a,
            Side::B => &self.item_b,
        }
    }

    pub fn swapped(&self) -> Encoders {
        Encoders {
            user_a: self.user_b.clone(),
            item_a: self.item_b.clone(),
            user_b: self.user_a.clone(),
            item_b: self.item_a.clone(),
        }
    }

    /// Embeds every interaction of `dataset` through the `side` autoencoders.
    /// Records of users in `shared` take part in cross-domain transfer.
    pub fn embed_domain(
        &self,
        side: Side,
        dataset: &DomainDataset,
        shared: &BTreeSet<String>,
    ) -> Result<EncodedDomain> {
        embed_records(self.user(side), self.item(side), dataset, shared)
    }
}

/// A trained autoencoder with its per-epoch loss trace.
pub type TrainedAutoencoder = (Autoencoder, Vec<f64>);

/// User and item autoencoders of one domain, each with its loss trace. Seeds
/// are derived from `config.seed` and the domain name, so a domain's encoders
/// do not depend on which other domain it is paired with.
pub fn train_domain_encoders(
    dataset: &DomainDataset,
    config: &AutoencoderConfig,
) -> Result<(TrainedAutoencoder, TrainedAutoencoder)> {
    let fit = |entity: Entity| -> Result<TrainedAutoencoder> {
        let (table, _) = match entity {
            Entity::User => dataset.encode_users()?,
            Entity::Item => dataset.encode_items()?,
        };
        let corpus: Vec<Vec<f64>> = table.into_values().collect();
        let cfg = AutoencoderConfig {
            seed: derive_seed(config.seed, &format!("ae/{}/{entity}", dataset.name)),
            ..config.clone()
        };
        log::debug!(
            "training {} {entity} autoencoder on {} vectors",
            dataset.name,
            corpus.len()
        );
        train_autoencoder(&corpus, &cfg, &dataset.name, entity)
    };
    Ok((fit(Entity::User)?, fit(Entity::Item)?))
}

/// Embeds every interaction of `dataset` with the given autoencoders.
pub fn embed_records(
    user_ae: &Autoencoder,
    item_ae: &Autoencoder,
    dataset: &DomainDataset,
    shared: &BTreeSet<String>,
) -> Result<EncodedDomain> {
    let (users, _) = dataset.encode_users()?;
    let (items, _) = dataset.encode_items()?;
    let mut records = Vec::with_capacity(dataset.interactions.len());
    let mut user_cache = std::collections::BTreeMap::new();
    let mut item_cache = std::collections::BTreeMap::new();
    for r in &dataset.interactions {
        if !user_cache.contains_key(&r.user_id) {
            let raw = users.get(&r.user_id).ok_or_else(|| Error::MissingFeatures {
                entity: "user",
                id: r.user_id.clone(),
            })?;
            user_cache.insert(r.user_id.clone(), user_ae.encode(raw)?);
        }
        if !item_cache.contains_key(&r.item_id) {
            let raw = items.get(&r.item_id).ok_or_else(|| Error::MissingFeatures {
                entity: "item",
                id: r.item_id.clone(),
            })?;
            item_cache.insert(r.item_id.clone(), item_ae.encode(raw)?);
        }
        records.push(EncodedRecord {
            user_id: r.user_id.clone(),
            item_id: r.item_id.clone(),
            user: user_cache[&r.user_id].clone(),
            item: item_cache[&r.item_id].clone(),
            rating: r.rating,
            shared: shared.contains(&r.user_id),
        });
    }
    Ok(EncodedDomain {
        name: dataset.name.clone(),
        records,
    })
}

/// Users with interactions in both domains.
pub fn shared_users(a: &DomainDataset, b: &DomainDataset) -> BTreeSet<String> {
    let in_b = b.active_users();
    a.active_users()
        .into_iter()
        .filter(|u| in_b.contains(u))
        .map(str::to_string)
        .collect()
}

/// One interaction with both sides already embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord {
    pub user_id: String,
    pub item_id: String,
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    pub rating: f64,
    /// Whether the user is present in both domains.
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDomain {
    pub name: String,
    pub records: Vec<EncodedRecord>,
}

impl EncodedDomain {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 0.5]")));
    }
    Ok(())
}

/// Initial scorer of a named domain. Dual and single-domain training both draw
/// from this stream, so an `alpha = 0` dual model starts from the same weights
/// as two independent models.
pub fn init_scorer(embed_dim: usize, seed: u64, domain: &str) -> RatingModel {
    RatingModel::new(
        embed_dim,
        &mut SeededRng::new(derive_seed(seed, &format!("scorer/{domain}"))),
    )
}

/// A pair of rating models tied together by an orthogonal user-space map.
///
/// Ratings are `(1−α)·RS_A(u, i) + α·RS_B(X·u, i)` in domain A and
/// `(1−α)·RS_B(v, j) + α·RS_A(Xᵀ·v, j)` in domain B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualModel {
    pub rs_a: RatingModel,
    pub rs_b: RatingModel,
    pub map: OrthogonalMap,
    alpha: f64,
    pub encoders: Encoders,
}

impl DualModel {
    /// Fresh model with seeded scorers and a random orthogonal map.
    pub fn new(encoders: Encoders, alpha: f64, seed: u64) -> Result<Self> {
        let d = encoders.embed_dim();
        let (na, nb) = (
            encoders.user_a.domain().to_string(),
            encoders.user_b.domain().to_string(),
        );
        let rs_a = init_scorer(d, seed, &na);
        let rs_b = init_scorer(d, seed, &nb);
        let map = OrthogonalMap::init(d, derive_seed(seed, "map"), (na, nb))?;
        DualModel::from_parts(rs_a, rs_b, map, alpha, encoders)
    }

    pub fn from_parts(
        rs_a: RatingModel,
        rs_b: RatingModel,
        map: OrthogonalMap,
        alpha: f64,
        encoders: Encoders,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let d = encoders.embed_dim();
        if rs_a.embed_dim() != d || rs_b.embed_dim() != d || map.dim() != d {
            return Err(Error::InvalidConfig(format!(
                "scorers ({}, {}) and map ({}) must match embedding size {d}",
                rs_a.embed_dim(),
                rs_b.embed_dim(),
                map.dim()
            )));
        }
        Ok(DualModel {
            rs_a,
            rs_b,
            map,
            alpha,
            encoders,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        self.encoders.embed_dim()
    }

    pub fn domain_name(&self, side: Side) -> &str {
        self.encoders.user(side).domain()
    }

    pub fn scorer(&self, side: Side) -> &RatingModel {
        match side {
            Side::A => &self.rs_a,
            Side::B => &self.rs_b,
        }
    }

    /// Maps a `side` user embedding into the other domain's user space.
    pub fn map_user(&self, side: Side, user: &[f64]) -> Result<Vec<f64>> {
        match side {
            Side::A => self.map.forward(user),
            Side::B => self.map.inverse(user),
        }
    }

    /// Labels swapped: A becomes B and `X` becomes `Xᵀ`.
    pub fn swapped(&self) -> DualModel {
        DualModel {
            rs_a: self.rs_b.clone(),
            rs_b: self.rs_a.clone(),
            map: self.map.transposed(),
            alpha: self.alpha,
            encoders: self.encoders.swapped(),
        }
    }

    /// In-domain term on embeddings.
    pub fn within(&self, side: Side, user: &[f64], item: &[f64]) -> Result<f64> {
        self.scorer(side).score(user, item)
    }

    /// Cross-domain term on embeddings: the other scorer on the mapped user.
    pub fn cross(&self, side: Side, user: &[f64], item: &[f64]) -> Result<f64> {
        let mapped = self.map_user(side, user)?;
        self.scorer(side.other()).score(&mapped, item)
    }

    /// Hybrid rating on embeddings with an explicit transfer rate.
    pub fn predict_embedded(&self, side: Side, user: &[f64], item: &[f64], alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let within = self.within(side, user, item)?;
        if alpha == 0.0 {
            return Ok(within);
        }
        let cross = self.cross(side, user, item)?;
        Ok((1.0 - alpha) * within + alpha * cross)
    }

    /// Hybrid rating from schema-encoded feature vectors.
    pub fn predict(&self, side: Side, user_features: &[f64], item_features: &[f64]) -> Result<f64> {
        self.predict_with_alpha(side, user_features, item_features, self.alpha)
    }

    /// As [`predict`](Self::predict) with a caller-chosen transfer rate; pass 0
    /// for users known to only one domain.
    pub fn predict_with_alpha(
        &self,
        side: Side,
        user_features: &[f64],
        item_features: &[f64],
        alpha: f64,
    ) -> Result<f64> {
        let u = self.encoders.user(side).encode(user_features)?;
        let i = self.encoders.item(side).encode(item_features)?;
        self.predict_embedded(side, &u, &i, alpha)
    }

    /// Prediction for an encoded record, with transfer switched off for users
    /// outside the overlap.
    pub fn predict_record(&self, side: Side, record: &EncodedRecord) -> Result<f64> {
        let alpha = if record.shared { self.alpha } else { 0.0 };
        self.predict_embedded(side, &record.user, &record.item, alpha)
    }
}

/// A dual model together with the feature schemas it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model: DualModel,
    pub user_schema_a: FeatureSchema,
    pub item_schema_a: FeatureSchema,
    pub user_schema_b: FeatureSchema,
    pub item_schema_b: FeatureSchema,
}

impl ModelBundle {
    pub fn new(model: DualModel, a: &DomainDataset, b: &DomainDataset) -> Self {
        ModelBundle {
            model,
            user_schema_a: a.user_schema.clone(),
            item_schema_a: a.item_schema.clone(),
            user_schema_b: b.user_schema.clone(),
            item_schema_b: b.item_schema.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::save(path, "dual-model-bundle", self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        persist::load(path, "dual-model-bundle")
    }
}
