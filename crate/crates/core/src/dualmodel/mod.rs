//! Per-domain rating networks joined by an orthogonal user-space map.
//!
//! A [`DualModel`] predicts each domain's ratings as a convex combination of
//! its own scorer and the other domain's scorer applied to the mapped user
//! embedding. Training interleaves mini-batches of both domains and updates
//! both scorers and the map in the same step. [`MultiModel`] generalizes the
//! prediction rule to any number of domains.

mod model;
mod multi;
mod rating;
mod train;

pub use model::{
    embed_records, init_scorer, shared_users, train_domain_encoders, DualModel, EncodedDomain, EncodedRecord,
    EncoderTraces, Encoders, ModelBundle, Side,
};
pub use multi::MultiModel;
pub use rating::{flatten_grads, RatingCache, RatingGrads, RatingModel, ScorerObjective, HIDDEN_UNITS};
pub use train::{fit_single, DualGrads, DualObjective, FitConfig, FitTrace};
