use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{EncodeWarning, FeatureSchema, RawFeatures};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    /// Normalized rating in [0, 1].
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// Interactions plus raw user/item attributes for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub name: String,
    pub interactions: Vec<InteractionRecord>,
    pub user_features: BTreeMap<String, RawFeatures>,
    pub item_features: BTreeMap<String, RawFeatures>,
    pub user_schema: FeatureSchema,
    pub item_schema: FeatureSchema,
}

/// Encoded feature vectors keyed by entity id.
pub type EncodedTable = BTreeMap<String, Vec<f64>>;

impl DomainDataset {
    /// Checks ratings and that every referenced id has a feature row.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.interactions.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.rating) {
                return Err(Error::InvalidConfig(format!(
                    "domain {}: interaction {i} has rating {} outside [0, 1]",
                    self.name, r.rating
                )));
            }
            if !self.user_features.contains_key(&r.user_id) {
                return Err(Error::MissingFeatures {
                    entity: "user",
                    id: r.user_id.clone(),
                });
            }
            if !self.item_features.contains_key(&r.item_id) {
                return Err(Error::MissingFeatures {
                    entity: "item",
                    id: r.item_id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Users with at least one interaction in this domain.
    pub fn active_users(&self) -> BTreeSet<&str> {
        self.interactions.iter().map(|r| r.user_id.as_str()).collect()
    }

    /// Fails if any item id is shared with `other`.
    pub fn ensure_disjoint_items(&self, other: &DomainDataset) -> Result<()> {
        match self
            .item_features
            .keys()
            .find(|id| other.item_features.contains_key(*id))
        {
            Some(id) => Err(Error::OverlappingItem(id.clone())),
            None => Ok(()),
        }
    }

    /// Same domain restricted to the interactions at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> DomainDataset {
        DomainDataset {
            interactions: indices.iter().map(|&i| self.interactions[i].clone()).collect(),
            ..self.clone_without_interactions()
        }
    }

    fn clone_without_interactions(&self) -> DomainDataset {
        DomainDataset {
            name: self.name.clone(),
            interactions: Vec::new(),
            user_features: self.user_features.clone(),
            item_features: self.item_features.clone(),
            user_schema: self.user_schema.clone(),
            item_schema: self.item_schema.clone(),
        }
    }

    pub fn encode_users(&self) -> Result<(EncodedTable, Vec<EncodeWarning>)> {
        encode_table(&self.user_schema, &self.user_features)
    }

    pub fn encode_items(&self) -> Result<(EncodedTable, Vec<EncodeWarning>)> {
        encode_table(&self.item_schema, &self.item_features)
    }

    /// Writes the interactions, user features and item features CSVs.
    pub fn write_csv(&self, interactions: &Path, users: &Path, items: &Path) -> Result<()> {
        write_interactions(interactions, &self.interactions)?;
        write_features(users, &self.user_features)?;
        write_features(items, &self.item_features)
    }
}

fn encode_table(
    schema: &FeatureSchema,
    rows: &BTreeMap<String, RawFeatures>,
) -> Result<(EncodedTable, Vec<EncodeWarning>)> {
    let mut table = EncodedTable::new();
    let mut warnings = Vec::new();
    for (id, raw) in rows {
        let (v, w) = schema
            .encode(raw)
            .map_err(|e| Error::Schema(format!("entity `{id}`: {e}")))?;
        table.insert(id.clone(), v);
        warnings.extend(w);
    }
    Ok((table, warnings))
}

/// Loads one domain from its interactions CSV and two feature CSVs.
///
/// Interactions: header `user_id,item_id,rating,timestamp` (timestamp column
/// and values optional). Features: header `entity_id,field,value`, one row per
/// value; multi-hot fields repeat rows.
pub fn load_domain(
    name: &str,
    interactions_path: &Path,
    user_features_path: &Path,
    item_features_path: &Path,
    user_schema: FeatureSchema,
    item_schema: FeatureSchema,
) -> Result<DomainDataset> {
    let ds = DomainDataset {
        name: name.to_string(),
        interactions: read_interactions(interactions_path)?,
        user_features: read_features(user_features_path)?,
        item_features: read_features(item_features_path)?,
        user_schema,
        item_schema,
    };
    ds.validate()?;
    for (id, raw) in &ds.user_features {
        for w in ds.user_schema.encode(raw)?.1 {
            log::warn!("{name}: user {id}: {w}");
        }
    }
    for (id, raw) in &ds.item_features {
        for w in ds.item_schema.encode(raw)?.1 {
            log::warn!("{name}: item {id}: {w}");
        }
    }
    Ok(ds)
}

/// Validates a domain pair: distinct names and disjoint item catalogs.
pub fn ensure_pair(a: &DomainDataset, b: &DomainDataset) -> Result<()> {
    if a.name == b.name {
        return Err(Error::InvalidConfig(format!("both domains are named `{}`", a.name)));
    }
    a.ensure_disjoint_items(b)
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn read_interactions(path: &Path) -> Result<Vec<InteractionRecord>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["user_id", "item_id", "rating"];
    let has_ts = headers.len() == 4 && &headers[3] == "timestamp";
    if headers.len() < 3 || headers.iter().take(3).ne(expected.iter().copied()) || (headers.len() > 3 && !has_ts) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `user_id,item_id,rating,timestamp`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() < 3 {
            return Err(bad(format!("expected at least 3 columns, got {}", rec.len())));
        }
        let rating: f64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("rating `{}` is not a number", &rec[2])))?;
        if !(0.0..=1.0).contains(&rating) {
            return Err(bad(format!("rating {rating} outside [0, 1]")));
        }
        let timestamp = match rec.get(3) {
            None | Some("") => None,
            Some(t) => Some(
                t.parse::<i64>()
                    .map_err(|_| bad(format!("timestamp `{t}` is not an integer")))?,
            ),
        };
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(bad("empty user_id or item_id".into()));
        }
        out.push(InteractionRecord {
            user_id: rec[0].to_string(),
            item_id: rec[1].to_string(),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<BTreeMap<String, RawFeatures>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(["entity_id", "field", "value"]) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `entity_id,field,value`".into(),
        });
    }
    let mut out: BTreeMap<String, RawFeatures> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != 3 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: rec.position().map_or(0, |p| p.line()),
                message: "expected `entity_id,field,value`".into(),
            });
        }
        out.entry(rec[0].to_string())
            .or_default()
            .entry(rec[1].to_string())
            .or_default()
            .push(rec[2].to_string());
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_interactions(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "user_id,item_id,rating,timestamp").map_err(io)?;
    for r in records {
        let ts = r.timestamp.map(|t| t.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.user_id, r.item_id, r.rating, ts).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_features(path: &Path, rows: &BTreeMap<String, RawFeatures>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "entity_id,field,value").map_err(io)?;
    for (id, raw) in rows {
        for (field, values) in raw {
            for v in values {
                writeln!(w, "{id},{field},{v}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}
