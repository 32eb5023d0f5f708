//! Dual-transfer cross-domain recommendation.
//!
//! Two domains share (part of) their user base but have disjoint item catalogs.
//! Each domain gets a feature autoencoder per entity type, a neural rating model,
//! and the pair shares an orthogonal map between user-embedding spaces. Ratings
//! are predicted as a convex combination of the in-domain score and the other
//! domain's score on the mapped user embedding.
//!
//! Modules:
//! - [`numeric`]: matrices, dense layers, seeded RNG, gradient checking.
//! - [`features`]: schemas, CSV ingestion, k-fold splits, synthetic data.
//! - [`autoencoder`]: per-(domain, entity) feature autoencoders.
//! - [`mapping`]: the orthogonal map and its projection.
//! - [`dualmodel`]: rating models, dual training, multi-domain prediction.
//! - [`nmflab`]: dual nonnegative matrix factorization convergence lab.
//! - [`eval`]: metrics, cross-validation, transfer-rate sweeps.

pub mod autoencoder;
pub mod dualmodel;
pub mod error;
pub mod eval;
pub mod features;
pub mod mapping;
pub mod nmflab;
pub mod numeric;
pub mod persist;

pub use error::{Error, Result};
