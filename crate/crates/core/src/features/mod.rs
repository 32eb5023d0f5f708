//! Feature schemas and encoding, dataset ingestion, fold splitting and
//! synthetic cross-domain data.

mod dataset;
mod folds;
mod schema;
pub mod synth;

pub use dataset::{
    ensure_pair, load_domain, read_features, read_interactions, write_features, write_interactions, DomainDataset,
    EncodedTable, InteractionRecord,
};
pub use folds::{kfold, FoldSplit};
pub use schema::{
    bucket_of, format_date, parse_date, EncodeWarning, FeatureSchema, FieldKind, FieldSpec, RawFeatures,
    DEFAULT_HASH_BUCKETS,
};
pub use synth::{synth_pair, GroundTruth, SynthConfig, SynthPair};
